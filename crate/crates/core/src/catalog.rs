//! Game-name resolution from post titles through a static alias table.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Game label for videos whose title matches no alias.
pub const UNRESOLVED: &str = "UNRESOLVED";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GameInfo {
    pub name: String,
    /// Short column label used by report tables, e.g. `GTA`.
    #[serde(default)]
    pub key: Option<String>,
    #[serde(default)]
    pub aliases: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct CatalogFile {
    games: Vec<GameInfo>,
}

/// Case-folded alias -> canonical game name.
#[derive(Debug, Clone, Default)]
pub struct GameCatalog {
    entries: BTreeMap<String, String>,
    games: Vec<GameInfo>,
}

impl GameCatalog {
    pub fn new(games: Vec<GameInfo>) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for game in &games {
            if game.name.trim().is_empty() || game.name == UNRESOLVED {
                return Err(Error::InvalidInput(format!(
                    "invalid canonical game name {:?}",
                    game.name
                )));
            }
            for alias in std::iter::once(&game.name).chain(&game.aliases) {
                let folded = alias.to_lowercase();
                if folded.trim().is_empty() {
                    return Err(Error::InvalidInput(format!(
                        "empty alias for {:?}",
                        game.name
                    )));
                }
                match entries.get(&folded) {
                    Some(existing) if existing != &game.name => {
                        return Err(Error::InvalidInput(format!(
                            "alias {alias:?} maps to both {existing:?} and {:?}",
                            game.name
                        )));
                    }
                    _ => {
                        entries.insert(folded, game.name.clone());
                    }
                }
            }
        }
        Ok(Self { entries, games })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: CatalogFile = serde_json::from_str(text)?;
        Self::new(file.games)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn is_empty(&self) -> bool {
        self.games.is_empty()
    }

    pub fn games(&self) -> &[GameInfo] {
        &self.games
    }

    pub fn is_canonical(&self, name: &str) -> bool {
        self.games.iter().any(|g| g.name == name)
    }

    /// Short label for a canonical name, falling back to the name itself.
    pub fn key_for<'a>(&'a self, name: &'a str) -> &'a str {
        self.games
            .iter()
            .find(|g| g.name == name)
            .and_then(|g| g.key.as_deref())
            .unwrap_or(name)
    }

    /// Longest case-insensitive alias contained in `title` wins; equal-length
    /// matches go to the alphabetically first canonical name.
    pub fn resolve(&self, title: &str) -> &str {
        let folded = title.to_lowercase();
        let mut best: Option<(usize, &str)> = None;
        for (alias, canonical) in &self.entries {
            if !folded.contains(alias.as_str()) {
                continue;
            }
            let len = alias.chars().count();
            let better = match best {
                None => true,
                Some((best_len, best_name)) => {
                    len > best_len || (len == best_len && canonical.as_str() < best_name)
                }
            };
            if better {
                best = Some((len, canonical));
            }
        }
        best.map_or(UNRESOLVED, |(_, name)| name)
    }
}

pub fn resolve_game_name<'a>(title: &str, catalog: &'a GameCatalog) -> &'a str {
    catalog.resolve(title)
}
