//! Records duplicate verdicts from two annotators and measures agreement.
//!
//! Pass `--serve` to expose the same session over HTTP on 127.0.0.1:8080.

use std::sync::Arc;

use dermaudit::review::server::{serve, ReviewState};
use dermaudit::review::{cohen_kappa, verdicts_of, ReviewSession, Verdict, VerdictLog, VerdictValue};
use dermaudit::SimilarityPair;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::env::temp_dir().join("dermaudit_review_example");
    std::fs::create_dir_all(&dir)?;
    let log_path = dir.join("verdicts.log");
    let _ = std::fs::remove_file(&log_path);

    let queue: Vec<SimilarityPair> =
        (0..6).map(|i| SimilarityPair::new(format!("p{i}"), format!("q{i}"), 0.99 - 0.01 * i as f64)).collect();
    let mut session = ReviewSession::new(queue, VerdictLog::open(&log_path)?)?;
    println!("session {}", session.id());

    use VerdictValue::*;
    let answers = [("ann", [Duplicate, Duplicate, Different, Unclear, Different, Duplicate]), ("bo", [Duplicate, Different, Different, Unclear, Different, Duplicate])];
    for (who, values) in answers {
        for v in values {
            let (_, pair) = session.next_pair(who).expect("queue not finished");
            let key = pair.key();
            session.record_verdict(Verdict::now(key, who, v))?;
        }
    }
    let a = verdicts_of(session.verdicts(), "ann");
    let b = verdicts_of(session.verdicts(), "bo");
    let k = cohen_kappa(&a, &b)?;
    println!("{} common pairs, {:.1}% agreement, kappa {:.3}", k.common, 100.0 * k.agreement, k.kappa);

    // Reopening the log restores the session.
    drop(session);
    let reopened = ReviewSession::new(
        (0..6).map(|i| SimilarityPair::new(format!("p{i}"), format!("q{i}"), 0.99 - 0.01 * i as f64)).collect(),
        VerdictLog::open(&log_path)?,
    )?;
    println!("replayed {} verdicts from {}", reopened.verdicts().len(), log_path.display());

    if std::env::args().any(|a| a == "--serve") {
        let rt = tokio::runtime::Runtime::new()?;
        rt.block_on(serve(Arc::new(ReviewState::new(reopened)), "127.0.0.1:8080".parse().unwrap()))?;
    }
    Ok(())
}
