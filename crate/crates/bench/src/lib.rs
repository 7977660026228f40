pub mod bridge;
pub mod files;
pub mod fixtures;
pub mod live;
pub mod manifest;
pub mod replay;
pub mod report;
pub mod run;
pub mod worlds;
