//! Flat JSON configuration with command-line overrides.
//!
//! Each subcommand declares its keys once through [`config!`], which
//! generates a clap argument struct (every flag optional) and a resolved
//! config struct with defaults. Resolution overlays the flags on the file,
//! then fills the remaining keys from the defaults.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};

use crate::Failure;

macro_rules! config {
    (
        $(#[$am:meta])* $args:ident => $cfg:ident {
            $( $(#[$fm:meta])* $field:ident : $ty:ty = $default:expr ),* $(,)?
        }
    ) => {
        $(#[$am])*
        #[derive(Debug, Clone, clap::Args, serde::Serialize)]
        pub struct $args {
            /// Flat JSON config file; flags override its values.
            #[arg(long)]
            #[serde(skip)]
            pub config: Option<std::path::PathBuf>,
            /// Output directory, created if missing.
            #[arg(long)]
            #[serde(skip_serializing_if = "Option::is_none")]
            pub out: Option<String>,
            /// Master seed.
            #[arg(long)]
            #[serde(skip_serializing_if = "Option::is_none")]
            pub seed: Option<u64>,
            $(
                $(#[$fm])*
                #[arg(long)]
                #[serde(skip_serializing_if = "Option::is_none")]
                pub $field: Option<$ty>,
            )*
        }

        #[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
        #[serde(default, deny_unknown_fields)]
        pub struct $cfg {
            pub out: String,
            pub seed: u64,
            $( pub $field: $ty, )*
        }

        impl Default for $cfg {
            fn default() -> Self {
                Self {
                    out: "out".into(),
                    seed: 0,
                    $( $field: $default, )*
                }
            }
        }

        impl $crate::config::Layered for $args {
            type Resolved = $cfg;
            fn config_path(&self) -> Option<&std::path::Path> {
                self.config.as_deref()
            }
        }
    };
}
pub(crate) use config;

/// A flag struct that resolves into a config struct.
pub trait Layered: Serialize {
    type Resolved: DeserializeOwned + Serialize;
    fn config_path(&self) -> Option<&Path>;
}

fn read_file(path: &Path) -> Result<Map<String, Value>, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::Usage(format!("cannot read config {}: {e}", path.display())))?;
    if text.trim().is_empty() {
        return Ok(Map::new());
    }
    match serde_json::from_str::<Value>(&text) {
        Ok(Value::Object(m)) => Ok(m),
        Ok(_) => Err(Failure::Usage(format!(
            "config {} must be a flat JSON object",
            path.display()
        ))),
        Err(e) => Err(Failure::Usage(format!("malformed config {}: {e}", path.display()))),
    }
}

/// File values, then flags on top, then defaults for whatever is left.
pub fn resolve<A: Layered>(args: &A) -> Result<A::Resolved, Failure> {
    let mut merged = match args.config_path() {
        Some(p) => read_file(p)?,
        None => Map::new(),
    };
    if let Some((k, _)) = merged.iter().find(|(_, v)| v.is_object()) {
        return Err(Failure::Usage(format!("config key {k:?} is nested; the file must be flat")));
    }
    match serde_json::to_value(args).expect("flags serialise") {
        Value::Object(flags) => merged.extend(flags),
        _ => unreachable!("flag structs serialise to objects"),
    }
    serde_json::from_value(Value::Object(merged)).map_err(|e| Failure::Usage(format!("invalid config: {e}")))
}

/// Echo of the resolved configuration, written next to the outputs.
pub fn resolved_json<C: Serialize>(command: &str, cfg: &C) -> String {
    let mut v = serde_json::to_value(cfg).expect("config serialises");
    if let Value::Object(m) = &mut v {
        m.insert("command".into(), Value::String(command.into()));
    }
    let mut s = serde_json::to_string_pretty(&v).expect("value serialises");
    s.push('\n');
    s
}
