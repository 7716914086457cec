use std::collections::BTreeSet;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::net::Ipv4Addr;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::IpReport;
use crate::error::{Error, Result};
use crate::extraction::parse_dotted_quad;

/// Where known-bad addresses come from. The file implementation is the only
/// one today; an online lookup service would slot in here.
pub trait BlacklistSource {
    fn addresses(&self) -> Result<BTreeSet<Ipv4Addr>>;
}

/// Newline-delimited dotted quads; `#` starts a comment.
#[derive(Debug, Clone)]
pub struct FileBlacklist {
    pub path: PathBuf,
}

impl FileBlacklist {
    pub fn new(path: impl Into<PathBuf>) -> Self {
        FileBlacklist { path: path.into() }
    }
}

impl BlacklistSource for FileBlacklist {
    fn addresses(&self) -> Result<BTreeSet<Ipv4Addr>> {
        let f = File::open(&self.path).map_err(|e| Error::io(&self.path, e))?;
        parse_blacklist(BufReader::new(f))
    }
}

pub fn parse_blacklist<R: BufRead>(reader: R) -> Result<BTreeSet<Ipv4Addr>> {
    let mut out = BTreeSet::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io("<blacklist>", e))?;
        let text = line.split('#').next().unwrap_or("").trim();
        if text.is_empty() {
            continue;
        }
        let octets = parse_dotted_quad(text).ok_or_else(|| Error::BadAddress {
            line: i + 1,
            text: text.to_string(),
        })?;
        out.insert(Ipv4Addr::from(octets));
    }
    Ok(out)
}

/// Set arithmetic between reported and blacklisted addresses, each list in
/// numeric address order.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct BlacklistOverlap {
    pub in_both: Vec<String>,
    pub only_report: Vec<String>,
    pub only_blacklist: Vec<String>,
}

/// Compare report addresses against a blacklist source.
pub fn compare_with<T>(reports: &[IpReport<T>], source: &dyn BlacklistSource) -> Result<BlacklistOverlap> {
    compare_addresses(reports.iter().map(|r| r.address.as_str()), source)
}

/// Compare arbitrary dotted-quad strings against a blacklist source.
pub fn compare_addresses<'a>(
    addresses: impl IntoIterator<Item = &'a str>,
    source: &dyn BlacklistSource,
) -> Result<BlacklistOverlap> {
    let listed = source.addresses()?;
    let mut reported = BTreeSet::new();
    for (i, address) in addresses.into_iter().enumerate() {
        let octets = parse_dotted_quad(address).ok_or_else(|| Error::BadAddress {
            line: i + 1,
            text: address.to_string(),
        })?;
        reported.insert(Ipv4Addr::from(octets));
    }
    let fmt = |s: BTreeSet<&Ipv4Addr>| s.into_iter().map(ToString::to_string).collect();
    Ok(BlacklistOverlap {
        in_both: fmt(reported.intersection(&listed).collect()),
        only_report: fmt(reported.difference(&listed).collect()),
        only_blacklist: fmt(listed.difference(&reported).collect()),
    })
}

/// Compare report addresses against a blacklist file.
pub fn compare_blacklist<T>(reports: &[IpReport<T>], blacklist_path: impl AsRef<Path>) -> Result<BlacklistOverlap> {
    compare_with(reports, &FileBlacklist::new(blacklist_path.as_ref()))
}
