pub mod decode;
pub mod featurize;
pub mod prepare;
pub mod train;

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use npasr_core::training::Decoder;

use crate::config::PipelineConfig;

/// Environment variable capping worker threads.
pub const THREADS_VAR: &str = "NPASR_THREADS";

/// Per-item failure count; the process exits non-zero when it is positive.
pub type Failures = usize;

/// Pool sized by `NPASR_THREADS`, or rayon's default when unset.
pub fn thread_pool() -> Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(raw) = std::env::var(THREADS_VAR) {
        let n: usize = raw
            .trim()
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .with_context(|| format!("{THREADS_VAR}={raw:?} is not a positive integer"))?;
        builder = builder.num_threads(n);
    }
    Ok(builder.build()?)
}

/// `<dir>/<id>.wav`, or the sharded `<dir>/<id[..2]>/<id>.wav` layout when
/// only that exists.
pub fn audio_path(dir: &Path, utterance_id: &str) -> PathBuf {
    let flat = dir.join(format!("{utterance_id}.wav"));
    if flat.exists() {
        return flat;
    }
    let shard: String = utterance_id.chars().take(2).collect();
    let sharded = dir.join(shard).join(format!("{utterance_id}.wav"));
    if sharded.exists() {
        sharded
    } else {
        flat
    }
}

/// `--greedy` (or `decode.greedy`) wins; otherwise beam search with the
/// flag's width, falling back to `decode.beam_width`.
pub fn decoder_for(beam_width: Option<usize>, greedy: bool, config: &PipelineConfig) -> Decoder {
    if greedy || config.decode.greedy {
        Decoder::Greedy
    } else {
        Decoder::Beam(beam_width.unwrap_or(config.decode.beam_width))
    }
}

pub fn feature_path(dir: &Path, utterance_id: &str) -> PathBuf {
    dir.join(format!("{utterance_id}.npfeat"))
}

/// Utterance ids become file names, so path separators are not allowed.
pub fn check_id(utterance_id: &str) -> Result<()> {
    anyhow::ensure!(
        !utterance_id.contains(['/', '\\']) && utterance_id != "." && utterance_id != "..",
        "utterance id {utterance_id:?} cannot be used as a file name"
    );
    Ok(())
}
