use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::codec::{
    blend_boundary, downscale_gop, upscale_gop, BilinearUpscaler, CodecConfig, DctTokenizer, Tokenizer, Upscaler,
};
use crate::error::{Error, Result};
use crate::select::{drop_count, random_drop_mask, token_similarity, top_k_drop_mask};
use crate::synth::VideoSource;
use crate::video::{boundary_flicker, sequence_mse, Gop};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AblateConfig {
    /// Share of P tokens removed by both strategies.
    pub drop_rate: f64,
    /// Seeds the random-drop baseline; GoP `k` uses `seed + k`.
    pub seed: u64,
    pub codec: CodecConfig,
}

impl Default for AblateConfig {
    fn default() -> Self {
        Self {
            drop_rate: 0.5,
            seed: 0,
            codec: CodecConfig::default(),
        }
    }
}

/// Token-only reconstruction error of one GoP under both drop strategies,
/// at working resolution.
#[derive(Clone, Debug, PartialEq)]
pub struct DropAblation {
    pub dropped: usize,
    pub mse_similarity: f64,
    pub mse_random: f64,
    pub similarity: Gop,
    pub random: Gop,
}

/// Drops the same number of P tokens by similarity and at random, then
/// decodes both against full I tokens.
pub fn drop_ablation(
    gop: &Gop,
    codec: &CodecConfig,
    drop_rate: f64,
    seed: u64,
    tok: &dyn Tokenizer,
) -> Result<DropAblation> {
    if !(0.0..=1.0).contains(&drop_rate) {
        return Err(Error::InvalidParameter(format!("drop rate {drop_rate} outside [0, 1]")));
    }
    codec.validate()?;
    let work = downscale_gop(gop, codec.scale)?;
    let (i, p) = tok.encode(&work, codec)?;
    let sim = token_similarity(&p, &i)?;
    let count = drop_count(drop_rate, p.rows() * p.cols());
    let by_sim = top_k_drop_mask(&sim, count);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let by_rand = random_drop_mask(p.rows(), p.cols(), count, &mut rng);
    let similarity = tok.decode(&i, &p.with_dropped(by_sim.as_slice())?, codec, work.dims())?;
    let random = tok.decode(&i, &p.with_dropped(by_rand.as_slice())?, codec, work.dims())?;
    Ok(DropAblation {
        dropped: count,
        mse_similarity: sequence_mse(work.frames(), similarity.frames())?,
        mse_random: sequence_mse(work.frames(), random.frames())?,
        similarity,
        random,
    })
}

/// Boundary flicker between two shown GoPs with and without the cross-fade,
/// as `(blended, unblended)`.
pub fn blend_ablation(prev: &Gop, curr: &Gop, blend_width: usize) -> Result<(f64, f64)> {
    let blended = blend_boundary(prev, curr, blend_width)?;
    Ok((
        boundary_flicker(prev, &blended, blend_width)?,
        boundary_flicker(prev, curr, blend_width)?,
    ))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub gop_id: u64,
    pub drop_rate: f64,
    pub mse_similarity: f64,
    pub mse_random: f64,
    /// Empty on the first GoP.
    pub flicker_blend: Option<f64>,
    pub flicker_no_blend: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub gops: usize,
    /// GoPs where similarity dropping had strictly lower error.
    pub similarity_wins: usize,
    pub boundaries: usize,
    /// Boundaries where blending strictly lowered flicker.
    pub blend_wins: usize,
    pub mean_mse_similarity: f64,
    pub mean_mse_random: f64,
}

/// Runs both ablations over every GoP of `src` and writes one CSV row per
/// GoP to `output`.
pub fn cmd_ablate(src: &dyn VideoSource, cfg: &AblateConfig, output: &Path) -> Result<(AblationReport, Vec<AblationRow>)> {
    let rows = ablation_rows(src, cfg, &DctTokenizer, &BilinearUpscaler)?;
    let mut wr = csv::Writer::from_writer(Vec::new());
    for r in &rows {
        wr.serialize(r).map_err(|e| Error::InvalidParameter(format!("ablation csv: {e}")))?;
    }
    let bytes = wr.into_inner().map_err(|e| Error::InvalidParameter(format!("ablation csv: {e}")))?;
    fs::write(output, bytes).map_err(|e| Error::io(output, e))?;
    let n = rows.len().max(1) as f64;
    let flick: Vec<_> = rows.iter().filter_map(|r| r.flicker_blend.zip(r.flicker_no_blend)).collect();
    let report = AblationReport {
        gops: rows.len(),
        similarity_wins: rows.iter().filter(|r| r.mse_similarity < r.mse_random).count(),
        boundaries: flick.len(),
        blend_wins: flick.iter().filter(|(b, u)| b < u).count(),
        mean_mse_similarity: rows.iter().map(|r| r.mse_similarity).sum::<f64>() / n,
        mean_mse_random: rows.iter().map(|r| r.mse_random).sum::<f64>() / n,
    };
    Ok((report, rows))
}

pub fn ablation_rows(
    src: &dyn VideoSource,
    cfg: &AblateConfig,
    tok: &dyn Tokenizer,
    up: &dyn Upscaler,
) -> Result<Vec<AblationRow>> {
    if src.is_empty() {
        return Err(Error::InvalidParameter("input holds no frames".into()));
    }
    let mut rows = Vec::with_capacity(src.gop_count());
    let mut prev: Option<Gop> = None;
    for k in 0..src.gop_count() {
        let gop = src.gop(k)?;
        let d = drop_ablation(&gop, &cfg.codec, cfg.drop_rate, cfg.seed.wrapping_add(k as u64), tok)?;
        // blending is judged on the full-token reconstruction
        let work = downscale_gop(&gop, cfg.codec.scale)?;
        let (i, p) = tok.encode(&work, &cfg.codec)?;
        let recon = tok.decode(&i, &p, &cfg.codec, work.dims())?;
        let shown = upscale_gop(&recon, cfg.codec.scale, src.dims(), up)?;
        let flicker = match &prev {
            Some(pg) => Some(blend_ablation(pg, &shown, cfg.codec.blend_width)?),
            None => None,
        };
        rows.push(AblationRow {
            gop_id: k as u64,
            drop_rate: cfg.drop_rate,
            mse_similarity: d.mse_similarity,
            mse_random: d.mse_random,
            flicker_blend: flicker.map(|f| f.0),
            flicker_no_blend: flicker.map(|f| f.1),
        });
        prev = Some(shown);
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{Content, SyntheticVideo};

    #[test]
    fn zero_drop_gives_identical_outputs() {
        let v = SyntheticVideo::new(Content::MovingSquare, 64, 48, 30.0, 9, 1).unwrap();
        let d = drop_ablation(&v.gop(0).unwrap(), &CodecConfig::default(), 0.0, 9, &DctTokenizer).unwrap();
        assert_eq!(d.dropped, 0);
        assert_eq!(d.similarity, d.random);
        assert_eq!(d.mse_similarity, d.mse_random);
    }

    #[test]
    fn similarity_beats_random_on_moving_square() {
        let v = SyntheticVideo::new(Content::MovingSquare, 96, 64, 30.0, 27, 2).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("ablate.csv");
        let (report, rows) = cmd_ablate(&v, &AblateConfig::default(), &out).unwrap();
        assert_eq!(report.gops, 3);
        assert_eq!(report.similarity_wins, 3);
        assert_eq!(report.boundaries, 2);
        assert_eq!(report.blend_wins, 2);
        let text = std::fs::read_to_string(&out).unwrap();
        assert!(text.starts_with("gop_id,drop_rate,mse_similarity,mse_random,flicker_blend,flicker_no_blend\n"));
        assert_eq!(text.lines().count(), 1 + rows.len());
    }

    #[test]
    fn rejects_bad_rate() {
        let v = SyntheticVideo::new(Content::NoiseField, 32, 32, 30.0, 9, 1).unwrap();
        assert!(drop_ablation(&v.gop(0).unwrap(), &CodecConfig::default(), 1.5, 0, &DctTokenizer).is_err());
    }
}
