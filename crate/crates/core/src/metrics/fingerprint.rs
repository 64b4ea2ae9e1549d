use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::image::Rect;

/// Canonical parameter record: `key=value` pairs sorted by key, joined by `;`.
///
/// Keys may not contain `=` or `;`; values may not contain `;`. Reals are
/// written in shortest round-trip form so parsing restores them exactly.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Fingerprint(BTreeMap<String, String>);

impl Fingerprint {
    pub fn new() -> Self {
        Fingerprint::default()
    }

    pub fn insert(&mut self, key: &str, value: impl fmt::Display) {
        let value = value.to_string();
        debug_assert!(!key.contains(['=', ';']) && !value.contains(';'), "{key}={value}");
        self.0.insert(key.to_string(), value);
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.0.get(key).map(String::as_str)
    }

    pub fn require(&self, key: &str) -> Result<&str> {
        self.get(key)
            .ok_or_else(|| Error::InvalidParam(format!("fingerprint lacks `{key}`")))
    }

    pub fn parse_key<T: FromStr>(&self, key: &str) -> Result<T> {
        let raw = self.require(key)?;
        raw.parse()
            .map_err(|_| Error::InvalidParam(format!("fingerprint key `{key}` has bad value `{raw}`")))
    }

    pub fn merge(&mut self, other: &Fingerprint) {
        for (k, v) in &other.0 {
            self.0.insert(k.clone(), v.clone());
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.0.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }
}

impl fmt::Display for Fingerprint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, (k, v)) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(";")?;
            }
            write!(f, "{k}={v}")?;
        }
        Ok(())
    }
}

impl FromStr for Fingerprint {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut fp = Fingerprint::new();
        if s.is_empty() {
            return Ok(fp);
        }
        for part in s.split(';') {
            let (k, v) = part
                .split_once('=')
                .ok_or_else(|| Error::InvalidParam(format!("fingerprint entry `{part}` lacks `=`")))?;
            if fp.0.insert(k.to_string(), v.to_string()).is_some() {
                return Err(Error::InvalidParam(format!("duplicate fingerprint key `{k}`")));
            }
        }
        Ok(fp)
    }
}

fn join(v: &[usize]) -> String {
    v.iter().map(usize::to_string).collect::<Vec<_>>().join(",")
}

/// `rect:<x,y[,z]>:<w,h[,d]>`
pub(crate) fn rect_string(r: &Rect) -> String {
    format!("rect:{}:{}", join(&r.origin), join(&r.extent))
}
