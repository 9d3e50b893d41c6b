//! `craic report --by {javadoc|category|stats}`: aggregate tables over the
//! scored corpus or the mined pairs.

use crate::artifacts::{read_jsonl, PAIRS_FILE, RANKED_JSONL_FILE};
use crate::config::PipelineConfig;
use crate::error::CliError;
use crate::lock::WorkLock;
use craic_core::extract::stats_from_lengths;
use craic_core::records::PairRecord;
use craic_core::score::{category_report, javadoc_report, ScoredSentence};
use craic_core::textprep::tokenize_comment;
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReportBy {
    Javadoc,
    Category,
    Stats,
}

impl std::str::FromStr for ReportBy {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "javadoc" => Ok(ReportBy::Javadoc),
            "category" => Ok(ReportBy::Category),
            "stats" => Ok(ReportBy::Stats),
            other => Err(format!(
                "unknown report `{other}` (expected javadoc|category|stats)"
            )),
        }
    }
}

#[derive(Debug)]
pub struct ReportOptions {
    pub by: ReportBy,
    pub labels: Option<PathBuf>,
    pub out: Option<PathBuf>,
}

pub fn cmd_report(config: &PipelineConfig, options: &ReportOptions) -> Result<String, CliError> {
    let _lock = WorkLock::acquire(&config.work)?;
    let report = match options.by {
        ReportBy::Javadoc => javadoc_table(config)?,
        ReportBy::Category => category_table(config, options)?,
        ReportBy::Stats => stats_table(config)?,
    };
    if let Some(out) = &options.out {
        std::fs::write(out, &report)?;
    }
    Ok(report)
}

fn read_ranked(config: &PipelineConfig) -> Result<Vec<ScoredSentence>, CliError> {
    let (_, ranked): (_, Vec<ScoredSentence>) =
        read_jsonl(&config.work.join(RANKED_JSONL_FILE), "score")?;
    Ok(ranked)
}

fn javadoc_table(config: &PipelineConfig) -> Result<String, CliError> {
    let ranked = read_ranked(config)?;
    let report = javadoc_report(&ranked, config.min_count);
    let mut out = String::new();
    writeln!(out, "javadoc type\tno. sentences\tavgppx").unwrap();
    for row in &report.rows {
        writeln!(
            out,
            "{}\t{}\t{:.2}",
            row.tag, row.sentence_count, row.avg_perplexity
        )
        .unwrap();
    }
    write!(
        out,
        "({} sentences under tags below the {}-occurrence threshold omitted)",
        report.omitted, config.min_count
    )
    .unwrap();
    Ok(out)
}

fn category_table(
    config: &PipelineConfig,
    options: &ReportOptions,
) -> Result<String, CliError> {
    let labels_path = options.labels.as_ref().ok_or_else(|| {
        CliError::ConfigInvalid("--by category needs --labels FILE (pair_id<TAB>category)".into())
    })?;
    let text = std::fs::read_to_string(labels_path)?;
    let mut labels = BTreeMap::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (pair_id, category) = line.split_once('\t').ok_or_else(|| {
            CliError::ConfigInvalid(format!(
                "{}:{}: expected pair_id<TAB>category",
                labels_path.display(),
                lineno + 1
            ))
        })?;
        labels.insert(pair_id.to_string(), category.to_string());
    }
    let ranked = read_ranked(config)?;
    let rows = category_report(&ranked, &labels)?;
    let mut out = String::new();
    writeln!(out, "category\tcount\tavg\tstdev\tmedian").unwrap();
    for row in &rows {
        writeln!(
            out,
            "{}\t{}\t{:.2}\t{:.2}\t{:.2}",
            row.category, row.count, row.avg, row.stdev, row.median
        )
        .unwrap();
    }
    out.pop();
    Ok(out)
}

fn stats_table(config: &PipelineConfig) -> Result<String, CliError> {
    let (_, pairs): (_, Vec<PairRecord>) = read_jsonl(&config.work.join(PAIRS_FILE), "extract")?;
    let method_lengths: Vec<usize> = pairs
        .iter()
        .map(|p| p.signature_tokens.len() + p.body_tokens.len())
        .collect();
    let comment_lengths: Vec<usize> = pairs
        .iter()
        .map(|p| tokenize_comment(&p.comment_text).len())
        .collect();
    let stats = stats_from_lengths(method_lengths, comment_lengths)?;
    let mut out = String::new();
    writeln!(out, "\tMethods\tComments").unwrap();
    writeln!(
        out,
        "Mean\t{:.2}\t{:.2}",
        stats.methods.mean, stats.comments.mean
    )
    .unwrap();
    writeln!(
        out,
        "Median\t{:.2}\t{:.2}",
        stats.methods.median, stats.comments.median
    )
    .unwrap();
    writeln!(
        out,
        "1st Quartile\t{:.2}\t{:.2}",
        stats.methods.q1, stats.comments.q1
    )
    .unwrap();
    write!(
        out,
        "3rd Quartile\t{:.2}\t{:.2}",
        stats.methods.q3, stats.comments.q3
    )
    .unwrap();
    Ok(out)
}
