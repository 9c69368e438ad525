//! Aggregate reporting: weight-sensitivity calibration, per-criterion
//! pass rates, leaderboards, and token-consumption summaries, plus
//! their CSV serializations.

use std::collections::BTreeMap;
use std::io;

use serde::{Deserialize, Serialize};

use super::judge::{JudgeVerdict, CRITERIA};
use super::score::{composite, MetricComponents, ScoredRow, WeightConfig};
use super::stats::{mean_absolute_error, pearson, spearman, spearman_with_p, StatsError};
use super::EvalError;

const FLAG_TOLERANCE: f64 = 1e-12;
const GRID_SEMANTIC_WEIGHTS: [f64; 6] = [0.0, 0.2, 0.4, 0.6, 0.8, 1.0];

/// One weighting of the semantic/syntactic split with its agreement
/// against expert ratings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridRow {
    pub w_semantic: f64,
    pub w_syntactic: f64,
    pub spearman_rho: f64,
    pub mae: f64,
    pub best_rho: bool,
    pub best_mae: bool,
}

/// Expert-agreement summary at the base weights plus the full
/// sensitivity grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationReport {
    pub spearman_rho: f64,
    pub spearman_p: f64,
    pub pearson_r: f64,
    pub mae: f64,
    pub grid_rows: Vec<GridRow>,
}

fn overall_scores(
    components: &[MetricComponents],
    weights: &WeightConfig,
) -> Result<Vec<f64>, EvalError> {
    components
        .iter()
        .map(|c| composite(c, weights).map(|b| b.s_overall))
        .collect()
}

/// Sweep `w_semantic` over 0.0..=1.0 in 0.2 steps, recomputing the
/// overall score and its agreement with expert ratings at each step.
/// Base-weight agreement statistics are reported alongside the grid.
pub fn weight_sensitivity(
    components: &[MetricComponents],
    expert_ratings: &[f64],
    base: &WeightConfig,
) -> Result<CalibrationReport, EvalError> {
    if components.len() != expert_ratings.len() {
        return Err(EvalError::Stats(StatsError::LengthMismatch {
            left: components.len(),
            right: expert_ratings.len(),
        }));
    }
    let base_overall = overall_scores(components, base)?;
    let (spearman_rho, spearman_p) = spearman_with_p(&base_overall, expert_ratings)?;
    let pearson_r = pearson(&base_overall, expert_ratings)?;
    let mae = mean_absolute_error(&base_overall, expert_ratings)?;

    let mut grid_rows = Vec::with_capacity(GRID_SEMANTIC_WEIGHTS.len());
    for w in GRID_SEMANTIC_WEIGHTS {
        let weights = base.with_semantic_weight(w);
        let overall = overall_scores(components, &weights)?;
        let rho = spearman(&overall, expert_ratings)?;
        let row_mae = mean_absolute_error(&overall, expert_ratings)?;
        grid_rows.push(GridRow {
            w_semantic: w,
            w_syntactic: 1.0 - w,
            spearman_rho: rho,
            mae: row_mae,
            best_rho: false,
            best_mae: false,
        });
    }
    let max_rho = grid_rows
        .iter()
        .map(|r| r.spearman_rho)
        .fold(f64::NEG_INFINITY, f64::max);
    let min_mae = grid_rows
        .iter()
        .map(|r| r.mae)
        .fold(f64::INFINITY, f64::min);
    for row in &mut grid_rows {
        row.best_rho = (max_rho - row.spearman_rho).abs() <= FLAG_TOLERANCE;
        row.best_mae = (row.mae - min_mae).abs() <= FLAG_TOLERANCE;
    }

    Ok(CalibrationReport {
        spearman_rho,
        spearman_p,
        pearson_r,
        mae,
        grid_rows,
    })
}

/// Pass rate of one criterion within one group, with the difference
/// against the all-group rate in percentage points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupRate {
    pub group: String,
    pub pct: f64,
    pub delta_pp: f64,
}

/// Pass rates for one criterion across all groups.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriteriaRow {
    pub criterion: String,
    pub all_pct: f64,
    pub groups: Vec<GroupRate>,
}

/// Per-criterion pass rates: one row per criterion, one column set per
/// group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriteriaReport {
    pub groups: Vec<String>,
    pub rows: Vec<CriteriaRow>,
}

fn pass_pct(verdicts: &[&JudgeVerdict], criterion_index: usize) -> f64 {
    let passed = verdicts
        .iter()
        .filter(|v| v.as_array()[criterion_index])
        .count();
    100.0 * passed as f64 / verdicts.len() as f64
}

/// Percentage of verdicts passing each criterion, overall and per
/// group, with group deltas computed from unrounded values. Rows are
/// ordered by overall pass rate descending, then criterion name.
pub fn criterion_pass_rates(
    verdicts: &[(String, JudgeVerdict)],
) -> Result<CriteriaReport, EvalError> {
    if verdicts.is_empty() {
        return Err(EvalError::EmptyInput("verdicts"));
    }
    let all: Vec<&JudgeVerdict> = verdicts.iter().map(|(_, v)| v).collect();
    let mut by_group: BTreeMap<&str, Vec<&JudgeVerdict>> = BTreeMap::new();
    for (group, verdict) in verdicts {
        by_group.entry(group.as_str()).or_default().push(verdict);
    }

    let mut rows = Vec::with_capacity(CRITERIA.len());
    for (index, criterion) in CRITERIA.iter().enumerate() {
        let all_pct = pass_pct(&all, index);
        let groups = by_group
            .iter()
            .map(|(group, members)| {
                let pct = pass_pct(members, index);
                GroupRate {
                    group: (*group).to_string(),
                    pct,
                    delta_pp: pct - all_pct,
                }
            })
            .collect();
        rows.push(CriteriaRow {
            criterion: (*criterion).to_string(),
            all_pct,
            groups,
        });
    }
    rows.sort_by(|a, b| {
        b.all_pct
            .total_cmp(&a.all_pct)
            .then_with(|| a.criterion.cmp(&b.criterion))
    });

    Ok(CriteriaReport {
        groups: by_group.keys().map(|g| (*g).to_string()).collect(),
        rows,
    })
}

/// One ranked (model, tier, approach) group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeaderboardRow {
    pub rank: u32,
    pub model_id: String,
    pub tier: String,
    pub approach: String,
    pub mean_overall: f64,
    pub median_overall: f64,
    pub runs: usize,
}

fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    }
}

/// Rank (model, tier, approach) groups by mean overall score
/// descending, breaking ties by median then group key. Rows without a
/// score breakdown are excluded.
pub fn leaderboard(rows: &[ScoredRow], top_n: usize) -> Vec<LeaderboardRow> {
    let mut groups: BTreeMap<(String, String, String), Vec<f64>> = BTreeMap::new();
    for row in rows {
        if let Some(breakdown) = &row.breakdown {
            groups
                .entry((row.model_id.clone(), row.tier.clone(), row.approach.clone()))
                .or_default()
                .push(breakdown.s_overall);
        }
    }
    let mut ranked: Vec<LeaderboardRow> = groups
        .into_iter()
        .map(|((model_id, tier, approach), mut scores)| {
            scores.sort_by(f64::total_cmp);
            let mean = scores.iter().sum::<f64>() / scores.len() as f64;
            LeaderboardRow {
                rank: 0,
                model_id,
                tier,
                approach,
                mean_overall: mean,
                median_overall: median(&scores),
                runs: scores.len(),
            }
        })
        .collect();
    ranked.sort_by(|a, b| {
        b.mean_overall
            .total_cmp(&a.mean_overall)
            .then_with(|| b.median_overall.total_cmp(&a.median_overall))
            .then_with(|| {
                (&a.model_id, &a.tier, &a.approach).cmp(&(&b.model_id, &b.tier, &b.approach))
            })
    });
    ranked.truncate(top_n);
    for (index, row) in ranked.iter_mut().enumerate() {
        row.rank = (index + 1) as u32;
    }
    ranked
}

/// Median token consumption for one approach relative to baseline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenRow {
    pub approach: String,
    pub runs: usize,
    pub median_total_tokens: f64,
    pub ratio_vs_baseline: f64,
}

/// Median total tokens per approach with ratios against the baseline
/// median. The baseline row comes first, remaining approaches sorted
/// by name.
pub fn token_report(rows: &[ScoredRow]) -> Result<Vec<TokenRow>, EvalError> {
    let mut groups: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for row in rows {
        groups
            .entry(row.approach.as_str())
            .or_default()
            .push(row.usage.total_tokens as f64);
    }
    let baseline = groups.get("baseline").filter(|tokens| !tokens.is_empty());
    let Some(baseline_tokens) = baseline else {
        return Err(EvalError::Stats(StatsError::DegenerateInput(
            "token report requires a non-empty baseline group",
        )));
    };
    let mut baseline_sorted = baseline_tokens.clone();
    baseline_sorted.sort_by(f64::total_cmp);
    let baseline_median = median(&baseline_sorted);
    if baseline_median == 0.0 {
        return Err(EvalError::Stats(StatsError::DegenerateInput(
            "baseline median token count is zero",
        )));
    }

    let mut report = Vec::with_capacity(groups.len());
    report.push(TokenRow {
        approach: "baseline".to_string(),
        runs: baseline_sorted.len(),
        median_total_tokens: baseline_median,
        ratio_vs_baseline: 1.0,
    });
    for (approach, tokens) in &mut groups {
        if *approach == "baseline" {
            continue;
        }
        tokens.sort_by(f64::total_cmp);
        let group_median = median(tokens);
        report.push(TokenRow {
            approach: (*approach).to_string(),
            runs: tokens.len(),
            median_total_tokens: group_median,
            ratio_vs_baseline: group_median / baseline_median,
        });
    }
    Ok(report)
}

pub fn write_leaderboard_csv<W: io::Write>(
    rows: &[LeaderboardRow],
    out: W,
) -> Result<(), csv::Error> {
    let mut writer = csv::Writer::from_writer(out);
    writer.write_record([
        "rank",
        "model",
        "tier",
        "approach",
        "mean_overall",
        "median_overall",
        "runs",
    ])?;
    for row in rows {
        writer.write_record([
            row.rank.to_string(),
            row.model_id.clone(),
            row.tier.clone(),
            row.approach.clone(),
            format!("{:.4}", row.mean_overall),
            format!("{:.4}", row.median_overall),
            row.runs.to_string(),
        ])?;
    }
    writer.flush()?;
    Ok(())
}

pub fn write_criteria_csv<W: io::Write>(report: &CriteriaReport, out: W) -> Result<(), csv::Error> {
    let mut writer = csv::Writer::from_writer(out);
    let mut header = vec!["criterion".to_string(), "all_pct".to_string()];
    for group in &report.groups {
        header.push(format!("{group}_pct"));
        header.push(format!("{group}_delta_pp"));
    }
    writer.write_record(&header)?;
    for row in &report.rows {
        let mut record = vec![row.criterion.clone(), format!("{:.1}", row.all_pct)];
        for rate in &row.groups {
            record.push(format!("{:.1}", rate.pct));
            record.push(format!("{:+.1}", rate.delta_pp));
        }
        writer.write_record(&record)?;
    }
    writer.flush()?;
    Ok(())
}

pub fn write_tokens_csv<W: io::Write>(rows: &[TokenRow], out: W) -> Result<(), csv::Error> {
    let mut writer = csv::Writer::from_writer(out);
    writer.write_record([
        "approach",
        "runs",
        "median_total_tokens",
        "ratio_vs_baseline",
    ])?;
    for row in rows {
        writer.write_record([
            row.approach.clone(),
            row.runs.to_string(),
            format!("{:.1}", row.median_total_tokens),
            format!("{:.2}", row.ratio_vs_baseline),
        ])?;
    }
    writer.flush()?;
    Ok(())
}

pub fn write_calibration_csv<W: io::Write>(
    report: &CalibrationReport,
    out: W,
) -> Result<(), csv::Error> {
    let mut writer = csv::Writer::from_writer(out);
    writer.write_record([
        "w_semantic",
        "w_syntactic",
        "spearman_rho",
        "mae",
        "best_rho",
        "best_mae",
    ])?;
    for row in &report.grid_rows {
        writer.write_record([
            format!("{:.1}", row.w_semantic),
            format!("{:.1}", row.w_syntactic),
            format!("{:.4}", row.spearman_rho),
            format!("{:.4}", row.mae),
            row.best_rho.to_string(),
            row.best_mae.to_string(),
        ])?;
    }
    writer.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::TokenUsage;

    fn components_for(s_semantic: f64, s_syntactic: f64) -> MetricComponents {
        MetricComponents {
            s_llm: s_semantic,
            s_embed: s_semantic,
            s_rouge_l: s_syntactic,
            s_lev: s_syntactic,
            verdict: JudgeVerdict::from_bits(0),
        }
    }

    fn scored(
        model: &str,
        tier: &str,
        approach: &str,
        overall: Option<f64>,
        total_tokens: u64,
    ) -> ScoredRow {
        let breakdown = overall.map(|value| {
            composite(
                &MetricComponents {
                    s_llm: value,
                    s_embed: value,
                    s_rouge_l: value,
                    s_lev: value,
                    verdict: JudgeVerdict::from_bits(0b11111_11111),
                },
                &WeightConfig::default(),
            )
            .unwrap()
        });
        let prompt = total_tokens / 2;
        ScoredRow {
            row_id: ScoredRow::row_id_for("det", approach, model, tier),
            gold_detection_id: "det".to_string(),
            approach: approach.to_string(),
            model_id: model.to_string(),
            tier: tier.to_string(),
            status: if breakdown.is_some() {
                "success"
            } else {
                "no-code-block"
            }
            .to_string(),
            iterations: 1,
            usage: TokenUsage::new(prompt, total_tokens - prompt),
            s_embed_raw: None,
            breakdown,
        }
    }

    #[test]
    fn sensitivity_grid_has_six_rows_and_identity_peak() {
        let components: Vec<MetricComponents> =
            [(0.9, 0.1), (0.7, 0.6), (0.5, 0.2), (0.3, 0.9), (0.1, 0.4)]
                .iter()
                .map(|&(sem, syn)| components_for(sem, syn))
                .collect();
        let ratings: Vec<f64> = components.iter().map(|c| c.s_llm).collect();
        let report = weight_sensitivity(&components, &ratings, &WeightConfig::default()).unwrap();

        assert_eq!(report.grid_rows.len(), 6);
        let weights: Vec<f64> = report.grid_rows.iter().map(|r| r.w_semantic).collect();
        assert_eq!(weights, vec![0.0, 0.2, 0.4, 0.6, 0.8, 1.0]);
        let last = report.grid_rows.last().unwrap();
        assert!((last.spearman_rho - 1.0).abs() < 1e-12);
        assert!(last.mae.abs() < 1e-12);
        assert!(last.best_rho);
        assert!(last.best_mae);
        let first = &report.grid_rows[0];
        assert!(!first.best_mae);
        assert!((report.mae - 0.0).abs() < 0.2);
    }

    #[test]
    fn sensitivity_base_statistics_match_direct_computation() {
        let components: Vec<MetricComponents> = [(0.8, 0.3), (0.6, 0.9), (0.4, 0.1), (0.2, 0.7)]
            .iter()
            .map(|&(sem, syn)| components_for(sem, syn))
            .collect();
        let ratings = vec![0.9, 0.5, 0.6, 0.1];
        let base = WeightConfig::default();
        let report = weight_sensitivity(&components, &ratings, &base).unwrap();

        let overall: Vec<f64> = components
            .iter()
            .map(|c| composite(c, &base).unwrap().s_overall)
            .collect();
        assert_eq!(report.spearman_rho, spearman(&overall, &ratings).unwrap());
        assert_eq!(report.pearson_r, pearson(&overall, &ratings).unwrap());
        assert_eq!(report.mae, mean_absolute_error(&overall, &ratings).unwrap());
        assert!(report.spearman_p >= 0.0 && report.spearman_p <= 1.0);
    }

    #[test]
    fn sensitivity_rejects_mismatched_lengths() {
        let components = vec![components_for(0.5, 0.5)];
        let err = weight_sensitivity(&components, &[0.5, 0.6], &WeightConfig::default());
        assert!(matches!(
            err,
            Err(EvalError::Stats(StatsError::LengthMismatch {
                left: 1,
                right: 2
            }))
        ));
    }

    #[test]
    fn pass_rates_compute_unrounded_deltas() {
        let verdicts = vec![
            (
                "baseline".to_string(),
                JudgeVerdict::from_bits(0b00000_00001),
            ),
            (
                "baseline".to_string(),
                JudgeVerdict::from_bits(0b00000_00011),
            ),
            (
                "baseline".to_string(),
                JudgeVerdict::from_bits(0b00000_00001),
            ),
            (
                "agentic".to_string(),
                JudgeVerdict::from_bits(0b00000_00011),
            ),
        ];
        let report = criterion_pass_rates(&verdicts).unwrap();
        assert_eq!(
            report.groups,
            vec!["agentic".to_string(), "baseline".to_string()]
        );
        assert_eq!(report.rows.len(), 10);

        let ttp = report
            .rows
            .iter()
            .find(|r| r.criterion == "ttp_match")
            .unwrap();
        assert_eq!(ttp.all_pct, 100.0);
        let logic = report
            .rows
            .iter()
            .find(|r| r.criterion == "logic_equivalence")
            .unwrap();
        assert_eq!(logic.all_pct, 50.0);
        let agentic = &logic.groups[0];
        assert_eq!(agentic.group, "agentic");
        assert_eq!(agentic.pct, 100.0);
        assert_eq!(agentic.delta_pp, 50.0);
        let baseline = &logic.groups[1];
        assert!((baseline.pct - 100.0 / 3.0).abs() < 1e-12);
        assert!((baseline.delta_pp - (100.0 / 3.0 - 50.0)).abs() < 1e-12);
    }

    #[test]
    fn pass_rate_rows_sort_by_rate_then_name() {
        let verdicts = vec![
            ("all".to_string(), JudgeVerdict::from_bits(0b00000_00011)),
            ("all".to_string(), JudgeVerdict::from_bits(0b00000_00001)),
        ];
        let report = criterion_pass_rates(&verdicts).unwrap();
        assert_eq!(report.rows[0].criterion, "ttp_match");
        assert_eq!(report.rows[0].all_pct, 100.0);
        assert_eq!(report.rows[1].criterion, "logic_equivalence");
        let zero_rows: Vec<&str> = report.rows[2..]
            .iter()
            .map(|r| r.criterion.as_str())
            .collect();
        let mut sorted = zero_rows.clone();
        sorted.sort();
        assert_eq!(zero_rows, sorted);
    }

    #[test]
    fn pass_rates_require_input() {
        assert!(matches!(
            criterion_pass_rates(&[]),
            Err(EvalError::EmptyInput("verdicts"))
        ));
    }

    #[test]
    fn leaderboard_ranks_by_mean_then_median_then_key() {
        let rows = vec![
            scored("m1", "default", "agentic", Some(0.578), 100),
            scored("m2", "default", "baseline", Some(0.575), 100),
            scored("m3", "default", "sequential", Some(0.4), 100),
            scored("m3", "default", "sequential", Some(0.6), 100),
            scored("m4", "default", "baseline", None, 100),
        ];
        let ranked = leaderboard(&rows, 5);
        assert_eq!(ranked.len(), 3);
        assert_eq!(ranked[0].model_id, "m1");
        assert_eq!(ranked[0].rank, 1);
        assert!((ranked[0].mean_overall - 0.578).abs() < 1e-9);
        assert_eq!(ranked[1].model_id, "m2");
        let sequential = &ranked[2];
        assert_eq!(sequential.model_id, "m3");
        assert!((sequential.mean_overall - 0.5).abs() < 1e-9);
        assert!((sequential.median_overall - 0.5).abs() < 1e-9);
        assert_eq!(sequential.runs, 2);
    }

    #[test]
    fn leaderboard_breaks_mean_ties_by_median() {
        let rows = vec![
            scored("a", "default", "baseline", Some(0.5), 10),
            scored("a", "default", "baseline", Some(0.5), 10),
            scored("b", "default", "baseline", Some(0.25), 10),
            scored("b", "default", "baseline", Some(0.75), 10),
        ];
        let ranked = leaderboard(&rows, 5);
        assert_eq!(ranked.len(), 2);
        assert_eq!(ranked[0].model_id, "a");
        assert_eq!(ranked[1].model_id, "b");
    }

    #[test]
    fn leaderboard_truncates_to_top_n() {
        let rows = vec![
            scored("a", "default", "baseline", Some(0.1), 10),
            scored("b", "default", "baseline", Some(0.2), 10),
            scored("c", "default", "baseline", Some(0.3), 10),
        ];
        assert_eq!(leaderboard(&rows, 2).len(), 2);
        assert_eq!(leaderboard(&rows, 5).len(), 3);
        assert!(leaderboard(&[], 5).is_empty());
    }

    #[test]
    fn token_report_medians_and_ratios() {
        let rows = vec![
            scored("m", "default", "baseline", Some(0.5), 100),
            scored("m", "default", "sequential", Some(0.5), 200),
            scored("m", "default", "agentic", Some(0.5), 100),
            scored("m", "default", "agentic", None, 10000),
            scored("m", "default", "agentic", Some(0.5), 10600),
        ];
        let report = token_report(&rows).unwrap();
        assert_eq!(report.len(), 3);
        assert_eq!(report[0].approach, "baseline");
        assert_eq!(report[0].median_total_tokens, 100.0);
        assert_eq!(report[0].ratio_vs_baseline, 1.0);
        assert_eq!(report[1].approach, "agentic");
        assert_eq!(report[1].median_total_tokens, 10000.0);
        assert_eq!(report[1].ratio_vs_baseline, 100.0);
        assert_eq!(report[2].approach, "sequential");
        assert_eq!(report[2].median_total_tokens, 200.0);
        assert_eq!(report[2].ratio_vs_baseline, 2.0);
    }

    #[test]
    fn token_report_even_group_averages_middle_pair() {
        let rows = vec![
            scored("m", "default", "baseline", Some(0.5), 100),
            scored("m", "default", "baseline", Some(0.5), 200),
        ];
        let report = token_report(&rows).unwrap();
        assert_eq!(report[0].median_total_tokens, 150.0);
    }

    #[test]
    fn token_report_requires_baseline() {
        let rows = vec![scored("m", "default", "agentic", Some(0.5), 100)];
        assert!(matches!(
            token_report(&rows),
            Err(EvalError::Stats(StatsError::DegenerateInput(_)))
        ));
    }

    #[test]
    fn leaderboard_csv_layout() {
        let rows = vec![
            scored("m1", "high", "agentic", Some(0.578), 100),
            scored("m2", "default", "baseline", Some(0.575), 100),
        ];
        let ranked = leaderboard(&rows, 5);
        let mut buffer = Vec::new();
        write_leaderboard_csv(&ranked, &mut buffer).unwrap();
        let text = String::from_utf8(buffer).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "rank,model,tier,approach,mean_overall,median_overall,runs"
        );
        let first = lines.next().unwrap();
        assert!(first.starts_with("1,m1,high,agentic,0.57"));
        assert!(first.ends_with(",1"));
    }

    #[test]
    fn criteria_csv_layout() {
        let verdicts = vec![
            (
                "baseline".to_string(),
                JudgeVerdict::from_bits(0b00000_00001),
            ),
            (
                "agentic".to_string(),
                JudgeVerdict::from_bits(0b00000_00011),
            ),
        ];
        let report = criterion_pass_rates(&verdicts).unwrap();
        let mut buffer = Vec::new();
        write_criteria_csv(&report, &mut buffer).unwrap();
        let text = String::from_utf8(buffer).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "criterion,all_pct,agentic_pct,agentic_delta_pp,baseline_pct,baseline_delta_pp"
        );
        assert_eq!(
            lines.next().unwrap(),
            "ttp_match,100.0,100.0,+0.0,100.0,+0.0"
        );
        assert_eq!(
            lines.next().unwrap(),
            "logic_equivalence,50.0,100.0,+50.0,0.0,-50.0"
        );
        assert_eq!(lines.count(), 8);
    }

    #[test]
    fn tokens_csv_layout() {
        let rows = vec![
            scored("m", "default", "baseline", Some(0.5), 100),
            scored("m", "default", "sequential", Some(0.5), 200),
        ];
        let report = token_report(&rows).unwrap();
        let mut buffer = Vec::new();
        write_tokens_csv(&report, &mut buffer).unwrap();
        let text = String::from_utf8(buffer).unwrap();
        assert_eq!(
            text,
            "approach,runs,median_total_tokens,ratio_vs_baseline\n\
             baseline,1,100.0,1.00\n\
             sequential,1,200.0,2.00\n"
        );
    }

    #[test]
    fn calibration_csv_layout() {
        let components: Vec<MetricComponents> = [(0.9, 0.1), (0.5, 0.6), (0.1, 0.3)]
            .iter()
            .map(|&(sem, syn)| components_for(sem, syn))
            .collect();
        let ratings: Vec<f64> = components.iter().map(|c| c.s_llm).collect();
        let report = weight_sensitivity(&components, &ratings, &WeightConfig::default()).unwrap();
        let mut buffer = Vec::new();
        write_calibration_csv(&report, &mut buffer).unwrap();
        let text = String::from_utf8(buffer).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 7);
        assert_eq!(
            lines[0],
            "w_semantic,w_syntactic,spearman_rho,mae,best_rho,best_mae"
        );
        assert!(lines[1].starts_with("0.0,1.0,"));
        assert!(lines[6].starts_with("1.0,0.0,1.0000,0.0000,"));
        assert!(lines[6].ends_with("true,true"));
    }
}
