//! Bundled persuasion tasks.
//!
//! All three share the same numbers: prior (2/3, 1/3), the sender is paid 1
//! whenever action 1 is taken, the receiver gets +1 for action 1 in state 1
//! and -1 for action 1 in state 0.

use crate::model::PersuasionTask;

fn base(label: &str) -> PersuasionTask {
    PersuasionTask::new(
        label,
        vec![2.0 / 3.0, 1.0 / 3.0],
        vec![vec![0.0, 1.0], vec![0.0, 1.0]],
        vec![vec![0.0, -1.0], vec![0.0, 1.0]],
    )
    .expect("bundled task is valid")
}

fn names(v: &[&str]) -> Vec<String> {
    v.iter().map(|s| s.to_string()).collect()
}

/// Professor (sender) grades students for a recruiter (receiver).
pub fn grading() -> PersuasionTask {
    base("grading_students")
        .with_names(names(&["weak", "excellent"]), names(&["not hire", "hire"]))
        .expect("names match")
}

pub fn math_baseline() -> PersuasionTask {
    base("math_baseline")
}

/// Seller (sender) describes a product to a buyer (receiver).
pub fn selling_products() -> PersuasionTask {
    base("selling_products")
        .with_names(names(&["low quality", "high quality"]), names(&["not buy", "buy"]))
        .expect("names match")
}

pub fn by_tag(tag: &str) -> Option<PersuasionTask> {
    match tag {
        "grading_students" | "grading" => Some(grading()),
        "math_baseline" => Some(math_baseline()),
        "selling_products" => Some(selling_products()),
        _ => None,
    }
}
