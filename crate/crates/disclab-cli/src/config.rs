//! Run configuration: a TOML file with one flat section per module.
//! Command-line flags override file values key by key. A module section may
//! also override the shared model keys of `[scaffold]`. Unknown sections
//! and keys are rejected.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};

use crate::args::{ModelArgs, ScaffoldArgs};
use crate::error::{validation, CliError};

const SECTIONS: [&str; 6] = ["scaffold", "profile", "riesz", "series", "logderiv", "ode"];

#[derive(Debug, Default)]
pub struct ConfigFile {
    sections: toml::Table,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| validation(format!("config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let sections: toml::Table =
            toml::from_str(text).map_err(|e| validation(format!("config: {}", e.message())))?;
        for (name, v) in &sections {
            if !SECTIONS.contains(&name.as_str()) {
                return Err(validation(format!("config: unknown section [{name}]")));
            }
            if !v.is_table() {
                return Err(validation(format!("config: [{name}] is not a table")));
            }
        }
        Ok(ConfigFile { sections })
    }

    /// Typed view of one section. Keys the type does not know are an error.
    pub fn section<T>(&self, name: &str) -> Result<Option<T>, CliError>
    where
        T: Serialize + DeserializeOwned,
    {
        let Some(toml::Value::Table(table)) = self.sections.get(name) else {
            return Ok(None);
        };
        let parsed: T = toml::Value::Table(table.clone())
            .try_into()
            .map_err(|e: toml::de::Error| validation(format!("config [{name}]: {}", e.message())))?;
        let known = to_map(&parsed)?;
        if let Some(bad) = table.keys().find(|k| !known.contains_key(*k)) {
            return Err(validation(format!("config [{name}]: unknown key `{bad}`")));
        }
        Ok(Some(parsed))
    }

    /// Flags merged over the named section.
    pub fn resolve<T>(&self, name: &str, flags: &T) -> Result<T, CliError>
    where
        T: Serialize + DeserializeOwned + Clone,
    {
        merge(flags, self.section::<T>(name)?.as_ref())
    }

    /// Model keys still unset fall back to `[scaffold]`.
    pub fn model(&self, model: &ModelArgs) -> Result<ModelArgs, CliError> {
        let base = self.section::<ScaffoldArgs>("scaffold")?.map(|s| s.model);
        merge(model, base.as_ref())
    }
}

fn to_map<T: Serialize>(x: &T) -> Result<Map<String, Value>, CliError> {
    match serde_json::to_value(x) {
        Ok(Value::Object(m)) => Ok(m),
        _ => Err(validation("config section is not a table")),
    }
}

/// Fields set on the command line win; unset ones fall back to the file.
pub fn merge<T>(flags: &T, file: Option<&T>) -> Result<T, CliError>
where
    T: Serialize + DeserializeOwned + Clone,
{
    let Some(file) = file else {
        return Ok(flags.clone());
    };
    let mut base = to_map(file)?;
    for (k, v) in to_map(flags)? {
        if !v.is_null() {
            base.insert(k, v);
        }
    }
    serde_json::from_value(Value::Object(base)).map_err(|e| validation(e.to_string()))
}
