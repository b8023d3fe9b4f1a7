use clap::Args;
use serde::{Deserialize, Serialize};

use crate::data::{cache_path, load_full_with_status, CacheStatus, SPLITS};
use crate::manifest::Record;
use crate::Global;

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct PrepareArgs {
    /// Rebuild caches even when they load cleanly.
    #[arg(long, env = "SPIXEL_FORCE")]
    pub force: bool,
}

pub fn run(global: &Global, args: &PrepareArgs, record: &mut Record) -> anyhow::Result<()> {
    let mut fresh = 0;
    for split in SPLITS {
        let (ds, status) = load_full_with_status(global, split, args.force)?;
        let path = cache_path(global, split);
        match status {
            CacheStatus::Hit => println!("{}: cache up to date ({} images) at {}", split.as_str(), ds.len(), path.display()),
            CacheStatus::Created | CacheStatus::Replaced => {
                fresh += 1;
                println!("{}: cached {} images at {}", split.as_str(), ds.len(), path.display());
            }
        }
        record.output(&format!("{}_cache", split.as_str()), &path);
        record.metric(&format!("{}_images", split.as_str()), ds.len() as f64);
    }
    if fresh == 0 {
        println!("nothing to do");
    }
    Ok(())
}
