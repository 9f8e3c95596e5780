use std::fmt;
use std::io;
use std::path::PathBuf;

use birdspot_core::game::GameError;
use birdspot_core::geo::GeoError;
use birdspot_core::sighting_model::ModelError;
use birdspot_core::suggester::SuggestError;
use birdspot_core::verifier::VerifyError;

use crate::checklist_file::FileError;

/// Who has to act on a failure: the person running the tool, or whoever
/// produced the engine artifacts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    User,
    Engine,
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error("{}", FileErrors(.0))]
    Checklists(Vec<FileError>),
    #[error("{}: {message}", path.display())]
    Format { path: PathBuf, message: String },
    #[error("config: {0}")]
    Config(String),
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Suggest(#[from] SuggestError),
    #[error(transparent)]
    Verify(#[from] VerifyError),
    #[error(transparent)]
    Game(#[from] GameError),
    #[error(transparent)]
    Geo(#[from] GeoError),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Self::Io {
            path: path.into(),
            source,
        }
    }

    pub fn format(path: impl Into<PathBuf>, message: impl fmt::Display) -> Self {
        Self::Format {
            path: path.into(),
            message: message.to_string(),
        }
    }

    pub fn kind(&self) -> ErrorKind {
        match self {
            Self::Model(e) => match e {
                ModelError::UnknownSpecies(_) | ModelError::InvalidConfig(_) | ModelError::NoCompleteChecklists => {
                    ErrorKind::User
                }
                _ => ErrorKind::Engine,
            },
            Self::Suggest(e) => match e {
                SuggestError::NotEnoughData { .. } | SuggestError::InvalidLevel => ErrorKind::User,
                _ => ErrorKind::Engine,
            },
            _ => ErrorKind::User,
        }
    }
}

struct FileErrors<'a>(&'a [FileError]);

impl fmt::Display for FileErrors<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, e) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str("\n")?;
            }
            write!(f, "{e}")?;
        }
        Ok(())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
