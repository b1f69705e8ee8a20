//! Gallery/probe evaluation.
//!
//! The embedding is a gait energy image (per-pixel temporal mean of aligned
//! frames) compared by Euclidean distance. Identification is rank-1: each
//! probe is assigned the subject of its nearest gallery candidate, where
//! candidates exclude gallery entries sharing the probe's view when the
//! protocol says so. Accuracies are percentages, aggregated in a fixed
//! shape: per (probe subset, probe view) cell, then the unweighted mean
//! over views per subset, then the unweighted mean over subsets. Ties on
//! distance break toward the lexicographically smallest (subject, view),
//! so reports are fully deterministic.
//!
//! The cross-domain runner reuses one pipeline configuration across two
//! dataset trees and reports the 2x2 (reference domain x test domain)
//! table. The GEI baseline has no trainable state, so cells depend only on
//! the test domain; the runner's contract is the table structure, and the
//! degenerate case A == B must reproduce the single-domain numbers exactly.

use std::collections::BTreeSet;
use std::path::Path;

use serde::Serialize;

use crate::align::{default_max_offset, disturb, gait_align};
use crate::config::{PipelineConfig, ProbSource};
use crate::datagen::seed_stream;
use crate::error::{Error, Result};
use crate::grid::{Condition, GaitSequence, Grid, StructuringElement, TargetSize};
use crate::io::{load_sequence, scan_dataset};
use crate::morphology::preprocess;
use crate::synthesis::reconstruct;

#[derive(Debug, Clone)]
pub struct Embedding {
    pub vector: Vec<f64>,
    pub subject: String,
    pub condition: Condition,
    pub view: String,
}

impl Embedding {
    pub fn new(
        vector: Vec<f64>,
        subject: impl Into<String>,
        condition: Condition,
        view: impl Into<String>,
    ) -> Result<Self> {
        if vector.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteInput {
                context: "embedding vector".into(),
            });
        }
        Ok(Embedding {
            vector,
            subject: subject.into(),
            condition,
            view: view.into(),
        })
    }
}

/// Temporal mean of the frames, flattened row-major. Frames must already be
/// at the target size; this function does not align.
pub fn gei_embed(seq: &GaitSequence, size: TargetSize) -> Result<Embedding> {
    if seq.frame_height() != size.height || seq.frame_width() != size.width {
        return Err(Error::DimensionMismatch {
            context: format!("gei_embed of {}/{}/{}", seq.subject, seq.condition, seq.view),
            expected_h: size.height,
            expected_w: size.width,
            got_h: seq.frame_height(),
            got_w: seq.frame_width(),
        });
    }
    let n = seq.frames.len() as f64;
    let mut vector = vec![0.0; size.height * size.width];
    for frame in &seq.frames {
        for (acc, &v) in vector.iter_mut().zip(frame.values()) {
            *acc += v;
        }
    }
    for v in &mut vector {
        *v /= n;
    }
    Embedding::new(vector, seq.subject.clone(), seq.condition.clone(), seq.view.clone())
}

pub fn distance(a: &Embedding, b: &Embedding) -> Result<f64> {
    if a.vector.len() != b.vector.len() {
        return Err(Error::LengthMismatch {
            context: "embedding distance".into(),
            expected: a.vector.len(),
            got: b.vector.len(),
        });
    }
    Ok(a.vector
        .iter()
        .zip(&b.vector)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbeSubset {
    pub name: String,
    pub conditions: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalProtocol {
    /// Conditions enrolled as the gallery.
    pub gallery: Vec<String>,
    pub probes: Vec<ProbeSubset>,
    pub exclude_identical_view: bool,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct ViewCell {
    pub view: String,
    pub correct: usize,
    pub total: usize,
    /// Percent.
    pub accuracy: f64,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct SubsetReport {
    pub name: String,
    pub views: Vec<ViewCell>,
    /// Unweighted mean over the per-view accuracies, percent.
    pub mean: f64,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct EvalReport {
    pub subsets: Vec<SubsetReport>,
    /// Unweighted mean over subset means, percent.
    pub overall: f64,
    pub gallery_size: usize,
    pub probe_count: usize,
}

impl EvalReport {
    /// One row per subset, one column per probe view plus the row mean;
    /// a final overall row.
    pub fn to_csv(&self) -> String {
        let views: Vec<&str> = {
            let mut set = BTreeSet::new();
            for s in &self.subsets {
                for v in &s.views {
                    set.insert(v.view.as_str());
                }
            }
            set.into_iter().collect()
        };
        let mut out = String::from("subset");
        for v in &views {
            out.push(',');
            out.push_str(v);
        }
        out.push_str(",mean\n");
        for s in &self.subsets {
            out.push_str(&s.name);
            for v in &views {
                out.push(',');
                if let Some(cell) = s.views.iter().find(|c| c.view == *v) {
                    out.push_str(&format!("{:.2}", cell.accuracy));
                }
            }
            out.push_str(&format!(",{:.2}\n", s.mean));
        }
        out.push_str("overall");
        for _ in &views {
            out.push(',');
        }
        out.push_str(&format!(",{:.2}\n", self.overall));
        out
    }
}

pub fn rank1(
    gallery: &[Embedding],
    probes: &[Embedding],
    protocol: &EvalProtocol,
) -> Result<EvalReport> {
    rank1_with_observer(gallery, probes, protocol, |_, _| {})
}

/// As `rank1`, invoking the observer on every (probe, candidate) comparison
/// actually made, so a test can assert what was and was not compared.
pub fn rank1_with_observer<F>(
    gallery: &[Embedding],
    probes: &[Embedding],
    protocol: &EvalProtocol,
    mut observe: F,
) -> Result<EvalReport>
where
    F: FnMut(&Embedding, &Embedding),
{
    let gallery: Vec<&Embedding> = gallery
        .iter()
        .filter(|e| protocol.gallery.iter().any(|c| c == e.condition.label()))
        .collect();
    if gallery.is_empty() {
        return Err(Error::EmptyProtocol {
            what: "no gallery entries match the gallery conditions".into(),
        });
    }
    let mut subsets = Vec::with_capacity(protocol.probes.len());
    let mut probe_count = 0;
    for subset in &protocol.probes {
        let members: Vec<&Embedding> = probes
            .iter()
            .filter(|e| subset.conditions.iter().any(|c| c == e.condition.label()))
            .collect();
        if members.is_empty() {
            return Err(Error::EmptyProtocol {
                what: format!("probe subset {} matched no sequences", subset.name),
            });
        }
        probe_count += members.len();
        // (view -> (correct, total)), deterministic order.
        let mut cells: std::collections::BTreeMap<&str, (usize, usize)> =
            std::collections::BTreeMap::new();
        for probe in members {
            let mut best: Option<(f64, &Embedding)> = None;
            for cand in &gallery {
                if protocol.exclude_identical_view && cand.view == probe.view {
                    continue;
                }
                observe(probe, cand);
                let d = distance(probe, cand)?;
                let better = match best {
                    None => true,
                    Some((bd, be)) => {
                        d < bd
                            || (d == bd
                                && (cand.subject.as_str(), cand.view.as_str())
                                    < (be.subject.as_str(), be.view.as_str()))
                    }
                };
                if better {
                    best = Some((d, cand));
                }
            }
            let Some((_, winner)) = best else {
                return Err(Error::NoValidCandidates {
                    subject: probe.subject.clone(),
                    condition: probe.condition.label().to_string(),
                    view: probe.view.clone(),
                });
            };
            let cell = cells.entry(probe.view.as_str()).or_insert((0, 0));
            cell.1 += 1;
            if winner.subject == probe.subject {
                cell.0 += 1;
            }
        }
        let views: Vec<ViewCell> = cells
            .into_iter()
            .map(|(view, (correct, total))| ViewCell {
                view: view.to_string(),
                correct,
                total,
                accuracy: 100.0 * correct as f64 / total as f64,
            })
            .collect();
        let mean = views.iter().map(|c| c.accuracy).sum::<f64>() / views.len() as f64;
        subsets.push(SubsetReport {
            name: subset.name.clone(),
            views,
            mean,
        });
    }
    let overall = subsets.iter().map(|s| s.mean).sum::<f64>() / subsets.len() as f64;
    Ok(EvalReport {
        subsets,
        overall,
        gallery_size: gallery.len(),
        probe_count,
    })
}

/// P for the synthesis step when the config asks for a degraded source:
/// each pixel is pulled from its true 0/1 value toward 0.5 by a seeded
/// uniform amount, never crossing it.
fn noisy_prob(mask: &Grid, seed: u64) -> Grid {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let values = mask
        .values()
        .iter()
        .map(|&v| {
            let u = rng.random_range(0.0..0.45);
            if v == 1.0 {
                1.0 - u
            } else {
                u
            }
        })
        .collect();
    Grid::float(mask.height(), mask.width(), values).expect("values stay within [0, 1]")
}

/// The per-sequence pipeline: optional frame disturbance, edge/interior
/// decomposition, synthesis, optional alignment, temporal mean.
fn embed_sequence(
    seq: &GaitSequence,
    cfg: &PipelineConfig,
    se: StructuringElement,
    target: TargetSize,
) -> Result<Embedding> {
    let max_offset = cfg
        .disturb
        .max_offset
        .unwrap_or_else(|| default_max_offset(seq.frame_height(), seq.frame_width()));
    let mut processed = Vec::with_capacity(seq.frames.len());
    for (t, frame) in seq.frames.iter().enumerate() {
        let tag = t.to_string();
        let mut mask = frame.binarized();
        if cfg.disturb.enabled {
            let s = seed_stream(
                cfg.pipeline.seed,
                &["disturb", &seq.subject, seq.condition.label(), &seq.view, &tag],
            );
            mask = disturb(&mask, s, max_offset);
        }
        let pair = preprocess(&mask, se)?;
        let prob = match cfg.pipeline.prob_source {
            ProbSource::Mask => mask.as_float(),
            ProbSource::NoisyMask => {
                let s = seed_stream(
                    cfg.pipeline.seed,
                    &["prob", &seq.subject, seq.condition.label(), &seq.view, &tag],
                );
                noisy_prob(&mask, s)
            }
        };
        let synth = reconstruct(&pair, &prob)?;
        let aligned = if cfg.pipeline.align {
            gait_align(&synth.composite, None, target)?.0
        } else {
            let c = &synth.composite;
            if c.height() != target.height || c.width() != target.width {
                return Err(Error::DimensionMismatch {
                    context: "evaluation without alignment (frames must already be at the target size)"
                        .into(),
                    expected_h: target.height,
                    expected_w: target.width,
                    got_h: c.height(),
                    got_w: c.width(),
                });
            }
            synth.composite
        };
        processed.push(aligned);
    }
    let aligned_seq = GaitSequence::new(
        processed,
        seq.subject.clone(),
        seq.condition.clone(),
        seq.view.clone(),
    )?;
    gei_embed(&aligned_seq, target)
}

/// Evaluate one dataset tree with the configured pipeline. The first
/// `train_subjects` subjects (sorted) are the reference split and take no
/// part in the evaluation.
pub fn run_single_domain(root: &Path, cfg: &PipelineConfig) -> Result<EvalReport> {
    let layout = scan_dataset(root)?;
    let protocol = cfg.protocol();
    let se = cfg.structuring_element()?;
    let target = cfg.target_size()?;
    let relevant: BTreeSet<&str> = protocol
        .gallery
        .iter()
        .map(|s| s.as_str())
        .chain(
            protocol
                .probes
                .iter()
                .flat_map(|p| p.conditions.iter().map(|s| s.as_str())),
        )
        .collect();
    let subjects = layout.subjects();
    let test_subjects: BTreeSet<&str> = subjects
        .iter()
        .skip(cfg.pipeline.train_subjects)
        .map(|s| s.as_str())
        .collect();
    if test_subjects.is_empty() {
        return Err(Error::EmptyProtocol {
            what: format!(
                "train_subjects = {} consumed all {} subjects",
                cfg.pipeline.train_subjects,
                subjects.len()
            ),
        });
    }
    let mut embeddings = Vec::new();
    for entry in &layout.entries {
        if !test_subjects.contains(entry.subject.as_str())
            || !relevant.contains(entry.condition.label())
        {
            continue;
        }
        let seq = load_sequence(entry)?;
        embeddings.push(embed_sequence(&seq, cfg, se, target)?);
    }
    rank1(&embeddings, &embeddings, &protocol)
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct CrossCell {
    pub test: String,
    pub subset_means: Vec<(String, f64)>,
    pub overall: f64,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct CrossRow {
    pub train: String,
    pub cells: Vec<CrossCell>,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct CrossDomainReport {
    pub method: String,
    pub rows: Vec<CrossRow>,
    /// Full per-domain reports backing the cells, keyed like `rows`.
    pub test_reports: Vec<(String, EvalReport)>,
}

impl CrossDomainReport {
    /// Rows: reference domain x method; columns: per test domain, each
    /// probe subset then the domain mean.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("train,method");
        for (name, report) in &self.test_reports {
            for s in &report.subsets {
                out.push_str(&format!(",{}:{}", name, s.name));
            }
            out.push_str(&format!(",{name}:mean"));
        }
        out.push('\n');
        for row in &self.rows {
            out.push_str(&format!("{},{}", row.train, self.method));
            for cell in &row.cells {
                for (_, mean) in &cell.subset_means {
                    out.push_str(&format!(",{mean:.2}"));
                }
                out.push_str(&format!(",{:.2}", cell.overall));
            }
            out.push('\n');
        }
        out
    }
}

fn domain_label(root: &Path) -> String {
    root.file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| root.display().to_string())
}

/// The 2x2 cross-domain table. The GEI baseline carries no trained state
/// between domains, so both rows hold the same numbers by construction;
/// what this runner guarantees is the table structure and that the
/// degenerate case (both roots equal) matches `run_single_domain` exactly.
pub fn run_cross_domain(
    root_a: &Path,
    root_b: &Path,
    cfg: &PipelineConfig,
) -> Result<CrossDomainReport> {
    let name_a = domain_label(root_a);
    let name_b = domain_label(root_b);
    let report_a = run_single_domain(root_a, cfg)?;
    let report_b = if root_a == root_b {
        report_a.clone()
    } else {
        run_single_domain(root_b, cfg)?
    };
    let cell = |name: &str, r: &EvalReport| CrossCell {
        test: name.to_string(),
        subset_means: r.subsets.iter().map(|s| (s.name.clone(), s.mean)).collect(),
        overall: r.overall,
    };
    let cells = vec![cell(&name_a, &report_a), cell(&name_b, &report_b)];
    let rows = vec![
        CrossRow {
            train: name_a.clone(),
            cells: cells.clone(),
        },
        CrossRow {
            train: name_b.clone(),
            cells,
        },
    ];
    Ok(CrossDomainReport {
        method: "gei".into(),
        rows,
        test_reports: vec![(name_a, report_a), (name_b, report_b)],
    })
}
