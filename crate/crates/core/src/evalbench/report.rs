//! Benchmark report files: machine-readable JSON plus a fixed-width table
//! with SR (%) and AS columns per task and their averages.

use super::EvalReport;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct PolicyResults {
    pub policy: String,
    pub reports: Vec<EvalReport>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct BenchReport {
    pub tasks: Vec<String>,
    pub policies: Vec<PolicyResults>,
}

impl BenchReport {
    pub fn new(tasks: Vec<String>, policies: Vec<PolicyResults>) -> Self {
        for p in &policies {
            assert_eq!(
                p.reports.len(),
                tasks.len(),
                "policy {} must carry one report per task",
                p.policy
            );
        }
        BenchReport { tasks, policies }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Fixed-width text table: one row per policy, SR% columns then AS
    /// columns, each with a trailing average.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let name_w = self
            .policies
            .iter()
            .map(|p| p.policy.len())
            .max()
            .unwrap_or(6)
            .max(6);
        out.push_str(&format!("{:<name_w$} |", "Policy"));
        for t in &self.tasks {
            out.push_str(&format!(" SR {t:>5} |"));
        }
        out.push_str(" SR Avg  |");
        for t in &self.tasks {
            out.push_str(&format!(" AS {t:>5} |"));
        }
        out.push_str(" AS Avg\n");
        let width = out.len();
        out.push_str(&"-".repeat(width.saturating_sub(1)));
        out.push('\n');
        for p in &self.policies {
            out.push_str(&format!("{:<name_w$} |", p.policy));
            let mut sr_sum = 0.0;
            for r in &p.reports {
                sr_sum += r.sr;
                out.push_str(&format!(" {:>7.1}% |", r.sr * 100.0).replace("% |", "% |"));
            }
            out.push_str(&format!(
                " {:>6.1}% |",
                100.0 * sr_sum / p.reports.len() as f64
            ));
            let mut as_vals = Vec::new();
            for r in &p.reports {
                match r.avg_steps {
                    Some(a) => {
                        as_vals.push(a);
                        out.push_str(&format!(" {a:>8.1} |"));
                    }
                    None => out.push_str(&format!(" {:>8} |", "-")),
                }
            }
            if as_vals.is_empty() {
                out.push_str(&format!(" {:>6}\n", "-"));
            } else {
                out.push_str(&format!(
                    " {:>6.1}\n",
                    as_vals.iter().sum::<f64>() / as_vals.len() as f64
                ));
            }
        }
        out
    }
}

/// Build the report from per-policy, per-task evaluations.
pub fn bench_report(tasks: Vec<String>, policies: Vec<PolicyResults>) -> BenchReport {
    BenchReport::new(tasks, policies)
}

/// Round-trip reader for the machine-readable results file.
pub fn parse_results(json: &str) -> Result<BenchReport, serde_json::Error> {
    serde_json::from_str(json)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evalbench::EpisodeRecord;

    fn report(task: &str, sr_n: usize, total: usize, steps: u32) -> EvalReport {
        let records: Vec<EpisodeRecord> = (0..total)
            .map(|i| EpisodeRecord {
                seed: i as u64,
                success: i < sr_n,
                steps,
                total_reward: 1.0,
            })
            .collect();
        EvalReport {
            task: task.into(),
            episodes: total,
            successes: sr_n,
            sr: sr_n as f64 / total as f64,
            avg_steps: if sr_n > 0 { Some(steps as f64) } else { None },
            mean_episode_reward: 1.0,
            records,
        }
    }

    #[test]
    fn averages_are_arithmetic_means() {
        let tasks = vec!["D-4".to_string(), "D-6".to_string(), "D-8".to_string()];
        let p = PolicyResults {
            policy: "unified".into(),
            reports: vec![report("D-4", 8, 10, 90), report("D-6", 6, 10, 110), report("D-8", 4, 10, 130)],
        };
        let bench = bench_report(tasks, vec![p]);
        let table = bench.to_table();
        // SR avg = (0.8 + 0.6 + 0.4)/3 = 60.0%; AS avg = 110.
        assert!(table.contains("60.0%"), "table:\n{table}");
        assert!(table.contains("110.0"), "table:\n{table}");
    }

    #[test]
    fn json_roundtrip_identical() {
        let tasks = vec!["R-4".to_string(), "R-8".to_string()];
        let bench = bench_report(
            tasks,
            vec![PolicyResults {
                policy: "student".into(),
                reports: vec![report("R-4", 5, 10, 80), report("R-8", 2, 10, 140)],
            }],
        );
        let back = parse_results(&bench.to_json()).unwrap();
        assert_eq!(bench, back);
    }

    #[test]
    fn all_six_tasks_present_when_requested() {
        let tasks: Vec<String> = ["D-4", "D-6", "D-8", "R-4", "R-6", "R-8"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        let reports: Vec<EvalReport> = tasks.iter().map(|t| report(t, 1, 2, 50)).collect();
        let bench = bench_report(
            tasks.clone(),
            vec![PolicyResults {
                policy: "x".into(),
                reports,
            }],
        );
        for t in &tasks {
            assert!(bench.to_table().contains(t.as_str()));
        }
    }
}
