//! Per-round records and their CSV exports.

use std::io::Write;

use super::GlobalStep;
use crate::error::Result;
use crate::localizer::FrequencyProfile;
use crate::select::AggregationRule;

#[derive(Debug, Clone, PartialEq)]
pub enum RoundStatus {
    Ok,
    Aborted(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoundRecord {
    pub round: usize,
    pub rule: AggregationRule,
    pub status: RoundStatus,
    /// Test accuracy and training loss after the round's step.
    pub accuracy: f64,
    pub loss: f64,
    pub decode_failures: usize,
    pub max_imaginary_residue: f64,
    pub selected: Vec<usize>,
    pub hints: Vec<usize>,
    pub scores: Option<Vec<f64>>,
    pub lambda: Option<Vec<f64>>,
    pub modified: Option<Vec<f64>>,
    pub profile: Option<FrequencyProfile>,
}

impl RoundRecord {
    pub fn new(round: usize, rule: AggregationRule) -> Self {
        Self {
            round,
            rule,
            status: RoundStatus::Ok,
            accuracy: 0.0,
            loss: 0.0,
            decode_failures: 0,
            max_imaginary_residue: 0.0,
            selected: Vec::new(),
            hints: Vec::new(),
            scores: None,
            lambda: None,
            modified: None,
            profile: None,
        }
    }

    pub fn aborted(&self) -> bool {
        matches!(self.status, RoundStatus::Aborted(_))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunLog {
    pub rule: AggregationRule,
    pub byzantine: Vec<usize>,
    pub global_step: GlobalStep,
    pub records: Vec<RoundRecord>,
    /// Not exported to CSV, which must stay reproducible.
    pub wall_clock_secs: f64,
}

impl RunLog {
    pub fn final_accuracy(&self) -> Option<f64> {
        self.records.last().map(|r| r.accuracy)
    }
}

fn writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w)
}

fn join(users: &[usize]) -> String {
    users.iter().map(usize::to_string).collect::<Vec<_>>().join(";")
}

fn opt(v: Option<&Vec<f64>>, i: usize) -> String {
    v.map(|v| v[i].to_string()).unwrap_or_default()
}

/// `round,rule,accuracy,loss,decode_failures,selected,status`
pub fn write_runlog<W: Write>(out: W, logs: &[RunLog]) -> Result<()> {
    let mut w = writer(out);
    w.write_record(["round", "rule", "accuracy", "loss", "decode_failures", "selected", "status"])?;
    for log in logs {
        for r in &log.records {
            w.write_record([
                r.round.to_string(),
                r.rule.to_string(),
                r.accuracy.to_string(),
                r.loss.to_string(),
                r.decode_failures.to_string(),
                join(&r.selected),
                match &r.status {
                    RoundStatus::Ok => "ok".to_string(),
                    RoundStatus::Aborted(why) => format!("aborted: {why}"),
                },
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// `round,rule,user,S,lambda,S_mod,selected`; cells a rule does not compute stay empty.
pub fn write_scores<W: Write>(out: W, logs: &[RunLog]) -> Result<()> {
    let mut w = writer(out);
    w.write_record(["round", "rule", "user", "S", "lambda", "S_mod", "selected"])?;
    for log in logs {
        for r in &log.records {
            let n = r.scores.as_ref().map_or(r.selected.len(), Vec::len);
            for i in 0..n {
                let user = i + 1;
                w.write_record([
                    r.round.to_string(),
                    r.rule.to_string(),
                    user.to_string(),
                    opt(r.scores.as_ref(), i),
                    opt(r.lambda.as_ref(), i),
                    opt(r.modified.as_ref(), i),
                    u8::from(r.selected.contains(&user)).to_string(),
                ])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// `round,rule,user,count,total_codewords` for rounds that built a profile.
pub fn write_profiles<W: Write>(out: W, logs: &[RunLog]) -> Result<()> {
    let mut w = writer(out);
    w.write_record(["round", "rule", "user", "count", "total_codewords"])?;
    for log in logs {
        for r in &log.records {
            if let Some(p) = &r.profile {
                for (i, c) in p.counts.iter().enumerate() {
                    w.write_record([
                        r.round.to_string(),
                        r.rule.to_string(),
                        (i + 1).to_string(),
                        c.to_string(),
                        p.total_codewords.to_string(),
                    ])?;
                }
            }
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn log() -> RunLog {
        let mut r = RoundRecord::new(0, AggregationRule::ModifiedKrum);
        r.accuracy = 0.5;
        r.loss = 1.25;
        r.selected = vec![1, 3];
        r.scores = Some(vec![1.0, 2.0, 3.0]);
        r.lambda = Some(vec![0.25, 0.5, 0.25]);
        r.modified = Some(vec![0.5, 1.0, 0.5]);
        r.profile = Some(FrequencyProfile { counts: vec![0, 4, 0], total_codewords: 4 });
        let mut f = RoundRecord::new(0, AggregationRule::FedAvg);
        f.selected = vec![1, 2, 3];
        f.status = RoundStatus::Aborted("x".into());
        RunLog {
            rule: AggregationRule::ModifiedKrum,
            byzantine: vec![2],
            global_step: GlobalStep::Mean,
            records: vec![r, f],
            wall_clock_secs: 0.0,
        }
    }

    #[test]
    fn csv_layouts() {
        let logs = [log()];
        let mut buf = Vec::new();
        write_runlog(&mut buf, &logs).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text,
            "round,rule,accuracy,loss,decode_failures,selected,status\n\
             0,modified_krum,0.5,1.25,0,1;3,ok\n\
             0,fedavg,0,0,0,1;2;3,aborted: x\n"
        );

        let mut buf = Vec::new();
        write_scores(&mut buf, &logs).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[1], "0,modified_krum,1,1,0.25,0.5,1");
        assert_eq!(lines[4], "0,fedavg,1,,,,1");
        assert_eq!(lines.len(), 7);

        let mut buf = Vec::new();
        write_profiles(&mut buf, &logs).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().nth(2), Some("0,modified_krum,2,4,4"));
    }
}
