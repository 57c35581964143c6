use std::collections::BTreeSet;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::io::{load_gray, load_mask, save_gray, save_mask};
use crate::metrics::{BinaryMask, GrayImage};

/// One image with its gold standard.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub id: String,
    pub image: GrayImage,
    pub gold: BinaryMask,
}

/// Images and gold masks, held in memory in id order.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    samples: Vec<Sample>,
}

const IMAGE_EXTENSIONS: [&str; 2] = ["png", "pgm"];

impl Dataset {
    /// Sorts by id and checks uniqueness and mask dimensions.
    pub fn new(mut samples: Vec<Sample>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::contract("dataset is empty"));
        }
        samples.sort_by(|a, b| a.id.cmp(&b.id));
        for w in samples.windows(2) {
            if w[0].id == w[1].id {
                return Err(Error::contract(format!("duplicate image id '{}'", w[0].id)));
            }
        }
        for s in &samples {
            if s.image.dims() != s.gold.dims() {
                return Err(Error::DimensionMismatch {
                    expected: s.image.dims(),
                    actual: s.gold.dims(),
                });
            }
        }
        Ok(Self { samples })
    }

    /// Reads `<root>/images/<id>.{png,pgm}` and `<root>/gold/<id>.{png,pgm}`.
    pub fn load(root: impl AsRef<Path>) -> Result<Self> {
        let root = root.as_ref();
        let images = root.join("images");
        let entries = std::fs::read_dir(&images).map_err(|e| Error::io(&images, e))?;
        let mut found = Vec::new();
        for entry in entries {
            let path = entry.map_err(|e| Error::io(&images, e))?.path();
            let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("");
            if !IMAGE_EXTENSIONS.contains(&ext.to_ascii_lowercase().as_str()) {
                continue;
            }
            if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                found.push((stem.to_string(), path.clone()));
            }
        }
        found.sort();
        let mut samples = Vec::with_capacity(found.len());
        let mut seen = BTreeSet::new();
        for (id, path) in found {
            if !seen.insert(id.clone()) {
                return Err(Error::contract(format!(
                    "image id '{id}' has more than one file"
                )));
            }
            let gold_path = IMAGE_EXTENSIONS
                .iter()
                .map(|ext| root.join("gold").join(format!("{id}.{ext}")))
                .find(|p| p.exists())
                .ok_or_else(|| Error::contract(format!("no gold mask for image '{id}'")))?;
            samples.push(Sample {
                image: load_gray(&path)?,
                gold: load_mask(&gold_path)?,
                id,
            });
        }
        Self::new(samples)
    }

    /// Writes the layout read by [`Dataset::load`], images and masks as PNG.
    pub fn save(&self, root: impl AsRef<Path>) -> Result<()> {
        let root = root.as_ref();
        for dir in ["images", "gold"] {
            let d = root.join(dir);
            std::fs::create_dir_all(&d).map_err(|e| Error::io(&d, e))?;
        }
        for s in &self.samples {
            save_gray(&s.image, root.join("images").join(format!("{}.png", s.id)))?;
            save_mask(&s.gold, root.join("gold").join(format!("{}.png", s.id)))?;
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn sample(&self, index: usize) -> &Sample {
        &self.samples[index]
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.samples
            .binary_search_by(|s| s.id.as_str().cmp(id))
            .ok()
    }

    pub fn ids(&self) -> Vec<&str> {
        self.samples.iter().map(|s| s.id.as_str()).collect()
    }

    /// `(rows, cols)` of every image.
    pub fn dims(&self) -> Vec<(usize, usize)> {
        self.samples
            .iter()
            .map(|s| (s.image.height(), s.image.width()))
            .collect()
    }
}

/// Training and test indices of one run, both in processing order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Number of training images: 30 of 35, otherwise 85% rounded, leaving at
/// least one image on each side. A single image is used for both.
pub fn train_size(n: usize, fraction: Option<f64>) -> usize {
    if n <= 1 {
        return n;
    }
    let t = match fraction {
        None if n == 35 => 30,
        None => (0.85 * n as f64).round() as usize,
        Some(f) => (f * n as f64).round() as usize,
    };
    t.clamp(1, n - 1)
}

/// Seeded random splits; run `r` draws from stream `r` of the seed.
pub fn random_splits(n: usize, runs: usize, seed: u64, fraction: Option<f64>) -> Vec<Split> {
    let n_train = train_size(n, fraction);
    (0..runs)
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(r as u64);
            let mut idx: Vec<usize> = (0..n).collect();
            idx.shuffle(&mut rng);
            if n <= 1 {
                return Split {
                    train: idx.clone(),
                    test: idx,
                };
            }
            let test = idx.split_off(n_train);
            Split { train: idx, test }
        })
        .collect()
}
