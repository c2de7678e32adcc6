use std::fs::File;
use std::io::BufWriter;
use std::path::Path;
use std::process::Command;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::learners::{word_count, AccuracyReport};
use crate::scheme::{write_sentences, Sentence};

/// A learner run as a shell command. `{train}` and `{test}` in the template
/// are replaced by paths to corpus files; the command must print a line
/// `accuracy: <decimal>` and exit with status 0.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExternalLearner {
    pub command: String,
}

fn quote(path: &Path) -> String {
    format!("'{}'", path.display().to_string().replace('\'', r"'\''"))
}

fn parse_accuracy(stdout: &str) -> Result<f64> {
    let value = stdout
        .lines()
        .find_map(|l| l.trim().strip_prefix("accuracy:"))
        .ok_or_else(|| {
            Error::UnparsableExternalOutput(stdout.trim().chars().take(200).collect())
        })?;
    let accuracy: f64 = value
        .trim()
        .parse()
        .map_err(|_| Error::UnparsableExternalOutput(value.trim().to_string()))?;
    if !(0.0..=100.0).contains(&accuracy) {
        return Err(Error::UnparsableExternalOutput(format!(
            "accuracy {accuracy} is outside [0, 100]"
        )));
    }
    Ok(accuracy)
}

impl ExternalLearner {
    pub fn new(command: impl Into<String>) -> Result<Self> {
        let command = command.into();
        if !command.contains("{train}") || !command.contains("{test}") {
            return Err(Error::InvalidLearner(
                "command template needs {train} and {test} placeholders".into(),
            ));
        }
        Ok(ExternalLearner { command })
    }

    pub fn measure(&self, train: &[Sentence], heldout: &[Sentence]) -> Result<AccuracyReport> {
        let dir = tempfile::tempdir()?;
        let train_path = dir.path().join("train.tsv");
        let test_path = dir.path().join("test.tsv");
        write_sentences(&mut BufWriter::new(File::create(&train_path)?), train)?;
        write_sentences(&mut BufWriter::new(File::create(&test_path)?), heldout)?;
        let command = self
            .command
            .replace("{train}", &quote(&train_path))
            .replace("{test}", &quote(&test_path));
        let output = Command::new("sh")
            .arg("-c")
            .arg(&command)
            .output()
            .map_err(|e| Error::ExternalCommandFailed(format!("cannot start `sh`: {e}")))?;
        if !output.status.success() {
            let stderr = String::from_utf8_lossy(&output.stderr);
            return Err(Error::ExternalCommandFailed(format!(
                "{} ({})",
                output.status,
                stderr.trim()
            )));
        }
        let accuracy = parse_accuracy(&String::from_utf8_lossy(&output.stdout))?;
        Ok(AccuracyReport {
            accuracy,
            tokens_evaluated: word_count(heldout),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scheme::Token;

    fn data() -> Vec<Sentence> {
        vec![vec![Token::new("a", "X"), Token::new("b", "Y")]]
    }

    #[test]
    fn reads_reported_accuracy() {
        let l = ExternalLearner::new(
            "cat {train} > /dev/null && cat {test} > /dev/null && echo 'accuracy: 87.5'",
        )
        .unwrap();
        let r = l.measure(&data(), &data()).unwrap();
        assert_eq!(r.accuracy, 87.5);
        assert_eq!(r.tokens_evaluated, 2);
    }

    #[test]
    fn sees_the_corpus_files() {
        let l = ExternalLearner::new("echo accuracy: $(grep -c . {train})0 ; : {test}").unwrap();
        assert_eq!(l.measure(&data(), &data()).unwrap().accuracy, 20.0);
    }

    #[test]
    fn failures_are_never_scored() {
        let failing = ExternalLearner::new("echo 'accuracy: 99'; exit 3 # {train} {test}").unwrap();
        assert!(matches!(
            failing.measure(&data(), &data()),
            Err(Error::ExternalCommandFailed(_))
        ));
        let garbage = ExternalLearner::new("echo hello # {train} {test}").unwrap();
        assert!(matches!(
            garbage.measure(&data(), &data()),
            Err(Error::UnparsableExternalOutput(_))
        ));
        let out_of_range = ExternalLearner::new("echo 'accuracy: 140' # {train} {test}").unwrap();
        assert!(out_of_range.measure(&data(), &data()).is_err());
        assert!(ExternalLearner::new("true").is_err());
    }
}
