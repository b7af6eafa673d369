//! Knowledge parses and the substructures extracted from them.

mod align;
mod io;
mod parse;
mod substructure;

pub use align::{attach_parses, Example};
pub use io::{format_amr, format_dependency, load_amr, load_dependency, parse_amr, parse_dependency};
pub use parse::{Edge, KnowledgeParse, ParseNode};
pub use substructure::{
    extract_substructures, substructure_stats, substructures_or_sentence, Substructure, SubstructureStats,
    DEFAULT_MAX_SUBSTRUCTURES,
};

use serde::{Deserialize, Serialize};

/// Which kind of external parse supplies the knowledge.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KnowledgeSource {
    Dependency,
    Amr,
}

impl KnowledgeSource {
    pub fn load(self, path: impl AsRef<std::path::Path>) -> crate::Result<Vec<KnowledgeParse>> {
        match self {
            KnowledgeSource::Dependency => load_dependency(path),
            KnowledgeSource::Amr => load_amr(path),
        }
    }
}

impl std::str::FromStr for KnowledgeSource {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "dependency" | "dep" => Ok(Self::Dependency),
            "amr" => Ok(Self::Amr),
            other => Err(format!("unknown knowledge source `{other}`")),
        }
    }
}
