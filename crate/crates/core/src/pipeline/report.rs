use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::Serialize;

use super::Mention;
use crate::corpus::{Forum, Label, LabelKind};
use crate::error::{Error, Result};
use crate::extraction::normalize_address;
use crate::scalar::Scalar;

/// One mention inside an [`IpReport`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MentionRef<T> {
    pub post_id: String,
    pub span: (usize, usize),
    pub p_malicious: T,
}

/// Per-address verdict over all of its mentions.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IpReport<T> {
    pub address: String,
    pub mention_count: usize,
    pub mentions: Vec<MentionRef<T>>,
    /// Positive means malicious.
    pub verdict: Label,
    pub first_seen: u64,
    pub last_seen: u64,
}

/// Majority vote, ties malicious.
fn verdict<T: Scalar>(ps: impl Iterator<Item = T>) -> Label {
    let (mut malicious, mut benign) = (0usize, 0usize);
    for p in ps {
        if p >= T::of(0.5) {
            malicious += 1;
        } else {
            benign += 1;
        }
    }
    Label::from_bool(malicious >= benign)
}

/// Group mentions by address. Sorted by mention count descending, then
/// address ascending.
pub fn aggregate_report<T: Scalar>(mentions: &[Mention<T>]) -> Vec<IpReport<T>> {
    let mut groups: BTreeMap<&str, Vec<&Mention<T>>> = BTreeMap::new();
    for m in mentions {
        groups.entry(m.address.as_str()).or_default().push(m);
    }
    let mut reports: Vec<IpReport<T>> = groups
        .into_iter()
        .map(|(address, ms)| IpReport {
            address: address.to_string(),
            mention_count: ms.len(),
            verdict: verdict(ms.iter().map(|m| m.p_malicious)),
            first_seen: ms.iter().map(|m| m.timestamp).min().unwrap_or(0),
            last_seen: ms.iter().map(|m| m.timestamp).max().unwrap_or(0),
            mentions: ms
                .into_iter()
                .map(|m| MentionRef {
                    post_id: m.post_id.clone(),
                    span: m.span,
                    p_malicious: m.p_malicious,
                })
                .collect(),
        })
        .collect();
    reports.sort_by(|a, b| {
        b.mention_count
            .cmp(&a.mention_count)
            .then_with(|| a.address.cmp(&b.address))
    });
    reports
}

const MENTION_HEADER: [&str; 6] = ["address", "post_id", "span_start", "span_end", "p_is_ip", "p_malicious"];
const REPORT_HEADER: [&str; 5] = ["address", "mention_count", "verdict", "first_seen", "last_seen"];

/// Probabilities are written in shortest round-trip form so verdicts can be
/// recomputed exactly from the file.
pub fn write_mentions_csv<T: Scalar, W: Write>(mentions: &[Mention<T>], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(MENTION_HEADER)?;
    for m in mentions {
        w.write_record([
            m.address.clone(),
            m.post_id.clone(),
            m.span.0.to_string(),
            m.span.1.to_string(),
            m.p_is_ip.to_string(),
            m.p_malicious.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<mentions>", e))
}

fn parse_field<F: std::str::FromStr>(rec: &csv::StringRecord, i: usize, row: usize) -> Result<F> {
    rec[i].parse().map_err(|_| Error::MalformedRecord {
        line: row,
        field: MENTION_HEADER.get(i).copied().unwrap_or("?").to_string(),
        reason: format!("cannot parse `{}`", &rec[i]),
    })
}

fn check_header(rdr: &mut csv::Reader<impl Read>, want: &[&str]) -> Result<()> {
    let got: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if got != want {
        return Err(Error::MalformedRecord {
            line: 1,
            field: "header".into(),
            reason: format!("expected `{}`", want.join(",")),
        });
    }
    Ok(())
}

/// Read a mentions CSV. Timestamps come from `forum` when given, else 0.
pub fn read_mentions_csv<T: Scalar, R: Read>(input: R, forum: Option<&Forum>) -> Result<Vec<Mention<T>>> {
    let mut rdr = csv::Reader::from_reader(input);
    check_header(&mut rdr, &MENTION_HEADER)?;
    let index = forum.map(Forum::index);
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 2;
        let rec = rec?;
        let address = normalize_address(&rec[0]).ok_or_else(|| Error::BadAddress {
            line: row,
            text: rec[0].to_string(),
        })?;
        let post_id = rec[1].to_string();
        let timestamp = match &index {
            Some(ix) => {
                ix.get(post_id.as_str())
                    .ok_or_else(|| Error::InvalidConfig(format!("row {row}: unknown post `{post_id}`")))?
                    .timestamp
            }
            None => 0,
        };
        out.push(Mention {
            address,
            post_id,
            span: (parse_field(&rec, 2, row)?, parse_field(&rec, 3, row)?),
            p_is_ip: T::of(parse_field(&rec, 4, row)?),
            p_malicious: T::of(parse_field(&rec, 5, row)?),
            timestamp,
        });
    }
    Ok(out)
}

/// `address,mention_count,verdict,first_seen,last_seen`.
pub fn write_report_csv<T, W: Write>(reports: &[IpReport<T>], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(REPORT_HEADER)?;
    for r in reports {
        w.write_record([
            r.address.clone(),
            r.mention_count.to_string(),
            LabelKind::Characterization.token(r.verdict).to_string(),
            r.first_seen.to_string(),
            r.last_seen.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<report>", e))
}

/// A row of a report CSV.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReportRow {
    pub address: String,
    pub mention_count: usize,
    pub verdict: Label,
    pub first_seen: u64,
    pub last_seen: u64,
}

pub fn read_report_csv<R: Read>(input: R) -> Result<Vec<ReportRow>> {
    let mut rdr = csv::Reader::from_reader(input);
    check_header(&mut rdr, &REPORT_HEADER)?;
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 2;
        let rec = rec?;
        let num = |j: usize| -> Result<u64> {
            rec[j].parse().map_err(|_| Error::MalformedRecord {
                line: row,
                field: REPORT_HEADER[j].into(),
                reason: format!("cannot parse `{}`", &rec[j]),
            })
        };
        let verdict = match &rec[2] {
            "malicious" => Label::Positive,
            "benign" => Label::Negative,
            other => {
                return Err(Error::UnknownLabel {
                    row,
                    label: other.to_string(),
                })
            }
        };
        out.push(ReportRow {
            address: normalize_address(&rec[0]).ok_or_else(|| Error::BadAddress {
                line: row,
                text: rec[0].to_string(),
            })?,
            mention_count: num(1)? as usize,
            verdict,
            first_seen: num(3)?,
            last_seen: num(4)?,
        });
    }
    Ok(out)
}
