#![allow(dead_code)]

#[path = "../../../core/tests/common/mod.rs"]
mod generators;

pub use generators::*;

use gradegauge::csv_io::{to_csv_string, CsvOptions};
use rand::seq::SliceRandom;

pub fn processed_csv(n: usize, seed: u64) -> String {
    to_csv_string(&ladder_dataset(n, seed), &CsvOptions::default()).unwrap()
}

/// Raw scores that discretize to the given processed values under the
/// default thresholds.
pub fn raw_scores(merit: &str, percent: &str) -> (&'static str, &'static str) {
    let marks = if merit == "good" { "157" } else { "101.5" };
    let pcm = match percent {
        "distinction" => "89.17",
        "first_class" => "64",
        _ => "52.4",
    };
    (marks, pcm)
}

/// 173 raw student rows drawn from the ladder; rows 1, 5, 9, ... carry the
/// opposite label, so exactly 43 disagree with the ladder.
pub fn planted_raw_csv() -> String {
    let space = feature_space();
    let mut r = rng(173);
    let mut s = String::from("sr_no,merit_no,merit_marks,app_id,name,gender,cast,location,percent,type,class\n");
    for i in 0..173 {
        let c = *space.choose(&mut r).unwrap();
        let truth = ladder(c[2], c[0], c[3]);
        let label = match (i % 4 == 1, truth) {
            (false, t) => t,
            (true, "pass") => "fail",
            (true, _) => "pass",
        };
        let (marks, pcm) = raw_scores(c[0], c[2]);
        let code = if c[3] == "AI" { "AI" } else { ["OPEN", "OBC", "SC"][i % 3] };
        s.push_str(&format!(
            "{},{},{marks},DX{:06},Student {i},{},OPEN,Pune,{pcm},{code},{}\n",
            i + 1,
            i + 1,
            120_000 + i,
            c[1],
            label.to_uppercase()
        ));
    }
    s
}
