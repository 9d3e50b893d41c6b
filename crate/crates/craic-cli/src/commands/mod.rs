mod extract;
mod prep;
mod report;
mod score;
mod train;

pub use extract::cmd_extract;
pub use prep::{cmd_prep, PrepOptions};
pub use report::{cmd_report, ReportBy, ReportOptions};
pub use score::{cmd_score, ScoreOptions, SplitSelect};
pub use train::{cmd_train, TrainOptions};
