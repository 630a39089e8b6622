//! WER/CER, LID recall, and stratified corpus reports.
//!
//! Corpus-level rates are error-weighted: total edit errors over total
//! reference length, not a mean of per-utterance rates. Group totals
//! therefore partition — strata sum back to the unstratified numbers.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::corpus::Vocabulary;
use crate::error::{Error, Result};
use crate::text;

/// One scored utterance: reference transcript, decoded hypothesis, and tags.
#[derive(Debug, Clone)]
pub struct ScoredUtterance {
    pub id: String,
    pub reference: String,
    pub hypothesis: String,
    pub lang: String,
    pub predicted_lid: Option<String>,
    pub dialect: Option<String>,
    pub stimulus_lang: Option<String>,
}

fn edit_distance<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    if a.is_empty() {
        return b.len();
    }
    if b.is_empty() {
        return a.len();
    }
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0usize; b.len() + 1];
    for (i, ai) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, bj) in b.iter().enumerate() {
            let cost = usize::from(ai != bj);
            cur[j + 1] = (prev[j + 1] + 1).min(cur[j] + 1).min(prev[j] + cost);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

fn normalized_words(reference: &str) -> Result<Vec<String>> {
    let norm = text::normalize(reference);
    let words: Vec<String> = text::words(&norm).into_iter().map(str::to_string).collect();
    if words.is_empty() {
        return Err(Error::Invalid(
            "reference is empty after normalization".into(),
        ));
    }
    Ok(words)
}

/// Word error rate in percent: `100 * (S + D + I) / N` over a minimal
/// word-level edit alignment, N = reference word count. Both strings pass
/// through the corpus normalization first.
pub fn word_error_rate(reference: &str, hypothesis: &str) -> Result<f64> {
    let (errors, n) = word_errors(reference, hypothesis)?;
    Ok(100.0 * errors as f64 / n as f64)
}

/// Edit error count and reference word count, the ingredients of corpus WER.
pub fn word_errors(reference: &str, hypothesis: &str) -> Result<(usize, usize)> {
    let ref_words = normalized_words(reference)?;
    let hyp_norm = text::normalize(hypothesis);
    let hyp_words: Vec<String> = text::words(&hyp_norm)
        .into_iter()
        .map(str::to_string)
        .collect();
    Ok((edit_distance(&ref_words, &hyp_words), ref_words.len()))
}

/// Character error rate in percent; the space counts as a character.
pub fn char_error_rate(reference: &str, hypothesis: &str) -> Result<f64> {
    let (errors, n) = char_errors(reference, hypothesis)?;
    Ok(100.0 * errors as f64 / n as f64)
}

/// Edit error count and reference character count.
pub fn char_errors(reference: &str, hypothesis: &str) -> Result<(usize, usize)> {
    let ref_norm = text::normalize(reference);
    if ref_norm.is_empty() {
        return Err(Error::Invalid(
            "reference is empty after normalization".into(),
        ));
    }
    let hyp_norm = text::normalize(hypothesis);
    let ref_chars: Vec<char> = ref_norm.chars().collect();
    let hyp_chars: Vec<char> = hyp_norm.chars().collect();
    Ok((edit_distance(&ref_chars, &hyp_chars), ref_chars.len()))
}

/// Read the LID prediction off a decoded label sequence: the first label if
/// it is an LID symbol. The remainder has every LID label removed, so error
/// rates are never contaminated by the auxiliary task.
pub fn extract_lid(decoded: &[usize], vocab: &Vocabulary) -> (Option<String>, Vec<usize>) {
    let predicted = decoded
        .first()
        .and_then(|&i| vocab.lid_lang(i))
        .map(str::to_string);
    let remainder = decoded
        .iter()
        .copied()
        .filter(|&i| !vocab.is_lid(i))
        .collect();
    (predicted, remainder)
}

/// Fraction of utterances of `lang` whose predicted LID equals `lang`;
/// a missing prediction counts as incorrect.
pub fn lid_recall(scored: &[ScoredUtterance], lang: &str) -> Result<f64> {
    let of_lang: Vec<&ScoredUtterance> = scored.iter().filter(|s| s.lang == lang).collect();
    if of_lang.is_empty() {
        return Err(Error::Invalid(format!(
            "no utterances with language `{lang}` to compute LID recall"
        )));
    }
    let correct = of_lang
        .iter()
        .filter(|s| s.predicted_lid.as_deref() == Some(lang))
        .count();
    Ok(correct as f64 / of_lang.len() as f64)
}

/// Metrics for one group of utterances.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupMetrics {
    pub key: String,
    pub wer: f64,
    pub cer: f64,
    /// Absent when the group carries no LID predictions at all.
    pub lid_recall: Option<f64>,
    pub n_utterances: usize,
    pub n_words: usize,
    pub word_errors: usize,
    pub n_chars: usize,
    pub char_errors: usize,
}

/// A stratified metric table, one row per group, keys sorted.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricReport {
    pub group_by: Vec<String>,
    pub groups: Vec<GroupMetrics>,
}

const GROUP_FIELDS: [&str; 3] = ["lang", "dialect", "stimulus_lang"];

fn field_value(s: &ScoredUtterance, field: &str) -> String {
    match field {
        "lang" => s.lang.clone(),
        "dialect" => s.dialect.clone().unwrap_or_else(|| "-".into()),
        "stimulus_lang" => s.stimulus_lang.clone().unwrap_or_else(|| "-".into()),
        _ => unreachable!("validated field"),
    }
}

/// Group scored utterances by the named fields and compute corpus-weighted
/// WER/CER plus LID recall per group. An empty `group_by` yields the single
/// group `all`.
pub fn stratified_report(scored: &[ScoredUtterance], group_by: &[String]) -> Result<MetricReport> {
    for f in group_by {
        if !GROUP_FIELDS.contains(&f.as_str()) {
            return Err(Error::Invalid(format!(
                "unknown group field `{f}` (expected one of {GROUP_FIELDS:?})"
            )));
        }
    }
    if scored.is_empty() {
        return Err(Error::Invalid("no scored utterances to report on".into()));
    }
    let mut buckets: BTreeMap<String, Vec<&ScoredUtterance>> = BTreeMap::new();
    for s in scored {
        let key = if group_by.is_empty() {
            "all".to_string()
        } else {
            group_by
                .iter()
                .map(|f| format!("{f}={}", field_value(s, f)))
                .collect::<Vec<_>>()
                .join(";")
        };
        buckets.entry(key).or_default().push(s);
    }
    let mut groups = Vec::with_capacity(buckets.len());
    for (key, members) in buckets {
        let mut w_err = 0usize;
        let mut w_tot = 0usize;
        let mut c_err = 0usize;
        let mut c_tot = 0usize;
        let mut lid_correct = 0usize;
        let mut lid_present = 0usize;
        for s in &members {
            let (we, wn) = word_errors(&s.reference, &s.hypothesis)?;
            let (ce, cn) = char_errors(&s.reference, &s.hypothesis)?;
            w_err += we;
            w_tot += wn;
            c_err += ce;
            c_tot += cn;
            if s.predicted_lid.is_some() {
                lid_present += 1;
            }
            if s.predicted_lid.as_deref() == Some(s.lang.as_str()) {
                lid_correct += 1;
            }
        }
        groups.push(GroupMetrics {
            key,
            wer: 100.0 * w_err as f64 / w_tot as f64,
            cer: 100.0 * c_err as f64 / c_tot as f64,
            lid_recall: (lid_present > 0).then(|| lid_correct as f64 / members.len() as f64),
            n_utterances: members.len(),
            n_words: w_tot,
            word_errors: w_err,
            n_chars: c_tot,
            char_errors: c_err,
        });
    }
    Ok(MetricReport {
        group_by: group_by.to_vec(),
        groups,
    })
}

impl MetricReport {
    /// CSV with columns `group,wer,cer,lid_recall,n_utt,n_words`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("group,wer,cer,lid_recall,n_utt,n_words\n");
        for g in &self.groups {
            let lid = g.lid_recall.map(|r| format!("{r:.4}")).unwrap_or_default();
            let _ = writeln!(
                out,
                "{},{:.4},{:.4},{lid},{},{}",
                g.key, g.wer, g.cer, g.n_utterances, g.n_words
            );
        }
        out
    }

    /// Aligned-column plain-text table.
    pub fn to_table(&self) -> String {
        let header = ["group", "wer", "cer", "lid_recall", "n_utt", "n_words"];
        let rows: Vec<[String; 6]> = self
            .groups
            .iter()
            .map(|g| {
                [
                    g.key.clone(),
                    format!("{:.2}", g.wer),
                    format!("{:.2}", g.cer),
                    g.lid_recall
                        .map(|r| format!("{r:.3}"))
                        .unwrap_or_else(|| "-".into()),
                    g.n_utterances.to_string(),
                    g.n_words.to_string(),
                ]
            })
            .collect();
        let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
        for row in &rows {
            for (i, cell) in row.iter().enumerate() {
                widths[i] = widths[i].max(cell.chars().count());
            }
        }
        let fmt_row = |cells: &[String]| -> String {
            cells
                .iter()
                .enumerate()
                .map(|(i, c)| format!("{:<width$}", c, width = widths[i]))
                .collect::<Vec<_>>()
                .join("  ")
                .trim_end()
                .to_string()
        };
        let mut out = String::new();
        let header_cells: Vec<String> = header.iter().map(|s| s.to_string()).collect();
        out.push_str(&fmt_row(&header_cells));
        out.push('\n');
        for row in &rows {
            out.push_str(&fmt_row(row.as_slice()));
            out.push('\n');
        }
        out
    }

    /// Word-weighted WER over all groups combined.
    pub fn overall_wer(&self) -> f64 {
        let errors: usize = self.groups.iter().map(|g| g.word_errors).sum();
        let words: usize = self.groups.iter().map(|g| g.n_words).sum();
        100.0 * errors as f64 / words as f64
    }
}
