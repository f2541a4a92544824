use std::path::Path;

/// Failure of a command, reported on stderr as one JSON object.
#[derive(Debug)]
pub enum CliError {
    Core(areatail::Error),
    ConfigParse(String),
    InvalidConfig(Vec<String>),
    UnknownPreset(String),
    Io(String),
    Manifest(String),
}

impl From<areatail::Error> for CliError {
    fn from(e: areatail::Error) -> Self {
        CliError::Core(e)
    }
}

impl CliError {
    pub fn io(path: &Path, e: std::io::Error) -> Self {
        CliError::Io(format!("{}: {e}", path.display()))
    }

    pub fn code(&self) -> &'static str {
        match self {
            CliError::Core(e) => e.code(),
            CliError::ConfigParse(_) => "ConfigParse",
            CliError::InvalidConfig(_) => "InvalidConfig",
            CliError::UnknownPreset(_) => "UnknownPreset",
            CliError::Io(_) => "Io",
            CliError::Manifest(_) => "Manifest",
        }
    }

    pub fn message(&self) -> String {
        match self {
            CliError::Core(e) => e.to_string(),
            CliError::ConfigParse(m) => format!("config could not be parsed: {m}"),
            CliError::InvalidConfig(v) => format!("config violates {} constraint(s)", v.len()),
            CliError::UnknownPreset(name) => {
                let known: Vec<&str> = crate::config::PRESETS.iter().map(|p| p.name).collect();
                format!("unknown preset {name:?}; known presets: {}", known.join(", "))
            }
            CliError::Io(m) | CliError::Manifest(m) => m.clone(),
        }
    }

    pub fn violations(&self) -> Vec<String> {
        match self {
            CliError::InvalidConfig(v) => v.clone(),
            CliError::Core(areatail::Error::InvalidParams(v)) => v.clone(),
            _ => Vec::new(),
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "error": {
                "code": self.code(),
                "message": self.message(),
                "violations": self.violations(),
            }
        })
    }
}
