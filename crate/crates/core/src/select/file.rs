//! Subset file: a `key = value` header, a `---` line, then one id per line.
//!
//! ```text
//! # realsub subset
//! phi = 0.3
//! threshold = 0.41
//! ...
//! ---
//! u17
//! u4
//! ```
//! Absent optional values are written as `none`. Floats use Rust's shortest
//! round-trip formatting, so parsing restores them bit-exactly.

use std::collections::HashMap;
use std::path::Path;

use super::{SelectionManifest, SubsetSpec};
use crate::dataset::write_file;
use crate::error::{Error, Result};

const TITLE: &str = "# realsub subset";
const SEPARATOR: &str = "---";

fn opt<T: ToString>(v: &Option<T>) -> String {
    v.as_ref().map_or_else(|| "none".to_string(), T::to_string)
}

pub fn render_subset(spec: &SubsetSpec) -> Result<String> {
    let m = &spec.manifest;
    let mut out = String::new();
    out.push_str(TITLE);
    out.push('\n');
    let fields = [
        ("phi", m.phi.to_string()),
        ("threshold", m.threshold.to_string()),
        ("selected_count", m.selected_count.to_string()),
        ("total_count", m.total_count.to_string()),
        ("random", m.random.to_string()),
        ("seed", opt(&m.seed)),
        ("seed_independent", m.seed_independent.to_string()),
        ("unrealistic_digest", opt(&m.unrealistic_digest)),
        ("realworld_digest", opt(&m.realworld_digest)),
        ("distance_digest", opt(&m.distance_digest)),
    ];
    for (k, v) in fields {
        out.push_str(&format!("{k} = {v}\n"));
    }
    out.push_str(SEPARATOR);
    out.push('\n');
    for id in &spec.selected_ids {
        if id.is_empty() || id.contains(['\n', '\r']) || id == SEPARATOR {
            return Err(Error::InvalidData(format!("id {id:?} cannot be written one per line")));
        }
        out.push_str(id);
        out.push('\n');
    }
    Ok(out)
}

pub fn parse_subset(text: &str) -> Result<SubsetSpec> {
    let mut header: HashMap<&str, &str> = HashMap::new();
    let mut lines = text.lines().enumerate();
    let malformed = |line: usize, detail: String| Error::MalformedRecord { line: line + 1, detail };

    let mut closed = false;
    for (i, line) in lines.by_ref() {
        if line == SEPARATOR {
            closed = true;
            break;
        }
        if line.starts_with('#') || line.trim().is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| malformed(i, format!("expected `key = value`, got {line:?}")))?;
        header.insert(k.trim(), v.trim());
    }
    if !closed {
        return Err(Error::InvalidData("subset file has no `---` separator".into()));
    }
    let selected_ids: Vec<String> = lines
        .filter(|(_, l)| !l.is_empty())
        .map(|(_, l)| l.to_string())
        .collect();

    let get = |key: &str| -> Result<&str> {
        header
            .get(key)
            .copied()
            .ok_or_else(|| Error::InvalidData(format!("subset header lacks `{key}`")))
    };
    fn parse<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
        v.parse()
            .map_err(|_| Error::InvalidData(format!("subset header `{key}` has bad value {v:?}")))
    }
    let optional_str = |key: &str| -> Result<Option<String>> {
        let v = get(key)?;
        Ok((v != "none").then(|| v.to_string()))
    };

    let seed = match get("seed")? {
        "none" => None,
        v => Some(parse("seed", v)?),
    };
    let manifest = SelectionManifest {
        phi: parse("phi", get("phi")?)?,
        threshold: parse("threshold", get("threshold")?)?,
        selected_count: parse("selected_count", get("selected_count")?)?,
        total_count: parse("total_count", get("total_count")?)?,
        random: parse("random", get("random")?)?,
        seed,
        seed_independent: parse("seed_independent", get("seed_independent")?)?,
        unrealistic_digest: optional_str("unrealistic_digest")?,
        realworld_digest: optional_str("realworld_digest")?,
        distance_digest: optional_str("distance_digest")?,
    };
    if manifest.selected_count != selected_ids.len() {
        return Err(Error::InvalidData(format!(
            "subset header declares {} ids but {} follow",
            manifest.selected_count,
            selected_ids.len()
        )));
    }
    Ok(SubsetSpec { manifest, selected_ids })
}

pub fn write_subset_file(spec: &SubsetSpec, path: &Path) -> Result<()> {
    write_file(path, render_subset(spec)?.as_bytes())
}

pub fn read_subset_file(path: &Path) -> Result<SubsetSpec> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_subset(&text)
}
