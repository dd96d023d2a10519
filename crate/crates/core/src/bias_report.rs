//! Per-source bias aggregation over daily front pages, with a geometric
//! rank-decay weighting for search-order effects.
//!
//! Page entries carry a score in [-1, 1] rather than a hard label so that
//! pre-averaged scores can be fed through the same path; a predicted label
//! maps to its value -1, 0 or +1.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::{Error, Label, Result};

/// Threshold on |normalized bias| above which a source is flagged.
pub const SIGNIFICANCE_THRESHOLD: f64 = 0.5;

/// One source's front page on one day. `entries` holds (rank, score) pairs
/// with ranks 1..=n, in any order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DayPage {
    pub source: String,
    pub date: String,
    pub entries: Vec<(u32, f64)>,
}

impl DayPage {
    pub fn new(
        source: impl Into<String>,
        date: impl Into<String>,
        entries: Vec<(u32, f64)>,
    ) -> Result<Self> {
        let page = Self {
            source: source.into(),
            date: date.into(),
            entries,
        };
        page.validate()?;
        Ok(page)
    }

    pub fn validate(&self) -> Result<()> {
        if self.entries.is_empty() {
            return Err(Error::Empty("day page"));
        }
        let mut ranks: Vec<u32> = self.entries.iter().map(|e| e.0).collect();
        ranks.sort_unstable();
        if ranks.iter().enumerate().any(|(i, &r)| r as usize != i + 1) {
            return Err(Error::InvalidInput(format!(
                "{} {}: ranks must be exactly 1..={}",
                self.source,
                self.date,
                ranks.len()
            )));
        }
        if let Some(&(r, s)) = self.entries.iter().find(|e| !(-1.0..=1.0).contains(&e.1)) {
            return Err(Error::InvalidInput(format!(
                "{} {}: score {s} at rank {r} is outside [-1, 1]",
                self.source, self.date
            )));
        }
        Ok(())
    }

    pub fn mean(&self) -> Result<f64> {
        rank_normalize(self, 1.0)
    }
}

/// Σ w_r·s_r / Σ w_r with w_r = decay^(r-1).
pub fn rank_normalize(page: &DayPage, decay: f64) -> Result<f64> {
    if !(decay > 0.0 && decay <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "decay {decay} is not in (0, 1]"
        )));
    }
    page.validate()?;
    let (mut num, mut den) = (0.0, 0.0);
    for &(rank, score) in &page.entries {
        let w = decay.powi(rank as i32 - 1);
        num += w * score;
        den += w;
    }
    Ok((num / den).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceReport {
    pub source: String,
    pub mean_bias: f64,
    pub normalized_bias: f64,
    pub significant: bool,
    pub day_count: usize,
}

pub fn aggregate_source(pages: &[DayPage], decay: f64) -> Result<SourceReport> {
    let first = pages.first().ok_or(Error::Empty("page list"))?;
    if let Some(p) = pages.iter().find(|p| p.source != first.source) {
        return Err(Error::InvalidInput(format!(
            "mixed sources: {:?} and {:?}",
            first.source, p.source
        )));
    }
    let (mut plain, mut weighted) = (0.0, 0.0);
    for p in pages {
        plain += p.mean()?;
        weighted += rank_normalize(p, decay)?;
    }
    let n = pages.len() as f64;
    let normalized_bias = weighted / n;
    Ok(SourceReport {
        source: first.source.clone(),
        mean_bias: plain / n,
        normalized_bias,
        significant: normalized_bias.abs() > SIGNIFICANCE_THRESHOLD,
        day_count: pages.len(),
    })
}

/// One report per source, in order of first appearance.
pub fn aggregate_all(pages: &[DayPage], decay: f64) -> Result<Vec<SourceReport>> {
    if pages.is_empty() {
        return Err(Error::Empty("page list"));
    }
    let mut order: Vec<&str> = Vec::new();
    let mut groups: BTreeMap<&str, Vec<DayPage>> = BTreeMap::new();
    for p in pages {
        let group = groups.entry(&p.source).or_insert_with(|| {
            order.push(&p.source);
            Vec::new()
        });
        group.push(p.clone());
    }
    order
        .into_iter()
        .map(|s| aggregate_source(&groups[s], decay))
        .collect()
}

/// One classified article, as written by the `predict` command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub id: String,
    pub predicted: Label,
    pub scores: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<Label>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub date: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rank: Option<u32>,
}

/// Groups predictions into day pages by (source, date). Predictions without
/// a source or date are skipped; missing ranks follow input order.
pub fn pages_from_predictions(predictions: &[Prediction]) -> Result<Vec<DayPage>> {
    let mut order: Vec<(String, String)> = Vec::new();
    let mut groups: BTreeMap<(String, String), Vec<&Prediction>> = BTreeMap::new();
    for p in predictions {
        let (Some(source), Some(date)) = (&p.source, &p.date) else {
            continue;
        };
        let key = (source.clone(), date.clone());
        groups
            .entry(key.clone())
            .or_insert_with(|| {
                order.push(key);
                Vec::new()
            })
            .push(p);
    }
    order
        .into_iter()
        .map(|key| {
            let items = &groups[&key];
            let all_ranked = items.iter().all(|p| p.rank.is_some());
            let entries = items
                .iter()
                .enumerate()
                .map(|(i, p)| {
                    let rank = if all_ranked { p.rank.unwrap() } else { i as u32 + 1 };
                    (rank, f64::from(p.predicted.value()))
                })
                .collect();
            DayPage::new(key.0, key.1, entries)
        })
        .collect()
}

#[derive(Deserialize)]
#[serde(untagged)]
enum ReportLine {
    Page(DayPage),
    Prediction(Prediction),
}

/// Reads JSON lines holding either day pages or predictions (mixing is
/// allowed) and returns the resulting pages.
pub fn read_report_input<R: BufRead>(reader: R) -> Result<Vec<DayPage>> {
    let mut pages = Vec::new();
    let mut predictions = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<ReportLine>(&line) {
            Ok(ReportLine::Page(p)) => {
                p.validate().map_err(|e| Error::Record {
                    line: i + 1,
                    message: e.to_string(),
                })?;
                pages.push(p);
            }
            Ok(ReportLine::Prediction(p)) => predictions.push(p),
            Err(e) => {
                return Err(Error::Record {
                    line: i + 1,
                    message: format!("neither a day page nor a prediction: {e}"),
                })
            }
        }
    }
    pages.extend(pages_from_predictions(&predictions)?);
    Ok(pages)
}

pub const REPORT_CSV_HEADER: &str = "source,mean_bias,normalized_bias,significant,day_count";

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn write_report_csv<W: Write>(reports: &[SourceReport], mut w: W) -> Result<()> {
    writeln!(w, "{REPORT_CSV_HEADER}")?;
    for r in reports {
        writeln!(
            w,
            "{},{},{},{},{}",
            csv_field(&r.source),
            r.mean_bias,
            r.normalized_bias,
            r.significant,
            r.day_count
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn page(scores: &[f64]) -> DayPage {
        let entries = scores.iter().enumerate().map(|(i, &s)| (i as u32 + 1, s)).collect();
        DayPage::new("s", "2021-01-01", entries).unwrap()
    }

    #[test]
    fn rank_normalize_examples() {
        assert_eq!(rank_normalize(&page(&[1.0, 1.0, 1.0]), 0.3).unwrap(), 1.0);
        assert_eq!(rank_normalize(&page(&[1.0, -1.0]), 1.0).unwrap(), 0.0);
        let third = rank_normalize(&page(&[1.0, -1.0]), 0.5).unwrap();
        assert!((third - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn rank_order_in_input_does_not_matter() {
        let a = DayPage::new("s", "d", vec![(1, 1.0), (2, -1.0), (3, 0.0)]).unwrap();
        let b = DayPage::new("s", "d", vec![(3, 0.0), (1, 1.0), (2, -1.0)]).unwrap();
        assert_eq!(rank_normalize(&a, 0.7).unwrap(), rank_normalize(&b, 0.7).unwrap());
    }

    #[test]
    fn invalid_pages_rejected() {
        assert!(DayPage::new("s", "d", vec![]).is_err());
        assert!(DayPage::new("s", "d", vec![(1, 1.0), (3, 1.0)]).is_err());
        assert!(DayPage::new("s", "d", vec![(1, 1.5)]).is_err());
        assert!(rank_normalize(&page(&[1.0]), 0.0).is_err());
        assert!(rank_normalize(&page(&[1.0]), 1.1).is_err());
    }

    #[test]
    fn all_negative_source_is_flagged() {
        let pages: Vec<DayPage> = (0..10).map(|_| page(&[-1.0, -1.0, -1.0])).collect();
        let r = aggregate_source(&pages, 0.8).unwrap();
        assert_eq!(r.mean_bias, -1.0);
        assert!(r.significant);
        assert_eq!(r.day_count, 10);
    }

    #[test]
    fn alternating_days_cancel() {
        let pages: Vec<DayPage> = (0..50)
            .map(|i| page(&[if i % 2 == 0 { 1.0 } else { -1.0 }]))
            .collect();
        let r = aggregate_source(&pages, 0.5).unwrap();
        assert_eq!(r.mean_bias, 0.0);
        assert!(!r.significant);
    }

    #[test]
    fn mixed_sources_rejected() {
        let mut b = page(&[1.0]);
        b.source = "other".into();
        assert!(aggregate_source(&[page(&[1.0]), b], 1.0).is_err());
        assert!(aggregate_source(&[], 1.0).is_err());
    }

    #[test]
    fn predictions_group_into_pages() {
        let pred = |id: &str, src: &str, rank: u32, l: Label| Prediction {
            id: id.into(),
            predicted: l,
            scores: vec![0.1, 0.2, 0.3],
            label: None,
            source: Some(src.into()),
            date: Some("2021-03-01".into()),
            rank: Some(rank),
        };
        let preds = vec![
            pred("a", "X", 2, Label::Liberal),
            pred("b", "Y", 1, Label::Neutral),
            pred("c", "X", 1, Label::Conservative),
        ];
        let pages = pages_from_predictions(&preds).unwrap();
        assert_eq!(pages.len(), 2);
        assert_eq!(pages[0].source, "X");
        assert_eq!(rank_normalize(&pages[0], 0.5).unwrap(), (1.0 - 0.5) / 1.5);
    }

    #[test]
    fn mixed_input_lines_parse() {
        let text = r#"{"source":"A","date":"2021-01-01","entries":[[1,0.5],[2,-0.5]]}
{"id":"x","predicted":1,"scores":[0.2,0.1,0.9],"source":"B","date":"2021-01-01","rank":1}
"#;
        let pages = read_report_input(text.as_bytes()).unwrap();
        assert_eq!(pages.len(), 2);
        assert_eq!(pages[1].entries, vec![(1, 1.0)]);
        assert!(matches!(
            read_report_input("{\"bogus\":1}\n".as_bytes()),
            Err(Error::Record { line: 1, .. })
        ));
    }

    #[test]
    fn csv_output() {
        let r = SourceReport {
            source: "A, Inc".into(),
            mean_bias: 0.25,
            normalized_bias: 0.5,
            significant: false,
            day_count: 2,
        };
        let mut out = Vec::new();
        write_report_csv(&[r], &mut out).unwrap();
        assert_eq!(
            String::from_utf8(out).unwrap(),
            "source,mean_bias,normalized_bias,significant,day_count\n\"A, Inc\",0.25,0.5,false,2\n"
        );
    }
}
