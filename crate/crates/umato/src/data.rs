//! Dataset containers, the synthetic Spheres benchmark, and file IO
//! (IDX image files, numeric CSV, embedding CSV).

use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::{Error, Result};

/// Dense matrix of points with optional integer class labels.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub points: Array2<f64>,
    pub labels: Option<Vec<u32>>,
}

impl Dataset {
    /// Validates finiteness and shape invariants.
    pub fn new(points: Array2<f64>, labels: Option<Vec<u32>>) -> Result<Self> {
        if points.nrows() == 0 || points.ncols() == 0 {
            return Err(Error::InvalidData(format!(
                "dataset must be non-empty, got {}x{}",
                points.nrows(),
                points.ncols()
            )));
        }
        if let Some(bad) = points.iter().position(|v| !v.is_finite()) {
            let d = points.ncols();
            return Err(Error::InvalidData(format!(
                "non-finite value at row {} column {}",
                bad / d,
                bad % d
            )));
        }
        if let Some(ref l) = labels {
            if l.len() != points.nrows() {
                return Err(Error::InvalidData(format!(
                    "label count {} does not match point count {}",
                    l.len(),
                    points.nrows()
                )));
            }
        }
        Ok(Self { points, labels })
    }

    pub fn n(&self) -> usize {
        self.points.nrows()
    }

    pub fn dim(&self) -> usize {
        self.points.ncols()
    }
}

/// A named dataset whose labels are always present.
#[derive(Debug, Clone)]
pub struct LabeledDataset {
    pub data: Dataset,
    pub name: String,
}

impl LabeledDataset {
    pub fn labels(&self) -> &[u32] {
        self.data.labels.as_deref().expect("labeled dataset")
    }

    pub fn n(&self) -> usize {
        self.data.n()
    }
}

/// Parameters of the synthetic Spheres benchmark: `n_inner_spheres` small
/// spheres with Gaussian-offset centers enclosed by one large origin-centered
/// sphere, all in `ambient_dim` dimensions.
#[derive(Debug, Clone)]
pub struct SpheresParams {
    pub n_inner_spheres: usize,
    pub points_per_inner: usize,
    pub inner_radius: f64,
    pub outer_points: usize,
    pub outer_radius: f64,
    pub ambient_dim: usize,
    /// Per-coordinate std of the Gaussian inner-sphere center offsets.
    pub center_std: f64,
}

impl Default for SpheresParams {
    fn default() -> Self {
        let ambient_dim = 101;
        Self {
            n_inner_spheres: 10,
            points_per_inner: 500,
            inner_radius: 5.0,
            outer_points: 5000,
            outer_radius: 25.0,
            ambient_dim,
            center_std: 10.0 / (ambient_dim as f64).sqrt(),
        }
    }
}

/// Generates the Spheres benchmark with default parameters (10,000 points in
/// 101 dimensions, labels 0..=10 with 10 = outer sphere).
pub fn generate_spheres(seed: u64) -> LabeledDataset {
    generate_spheres_with(&SpheresParams::default(), seed)
}

pub fn generate_spheres_with(params: &SpheresParams, seed: u64) -> LabeledDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = params.ambient_dim;
    let n = params.n_inner_spheres * params.points_per_inner + params.outer_points;
    let mut points = Array2::<f64>::zeros((n, d));
    let mut labels = Vec::with_capacity(n);
    let mut row = 0usize;
    for class in 0..params.n_inner_spheres {
        let center: Vec<f64> = (0..d)
            .map(|_| params.center_std * rng.sample::<f64, _>(StandardNormal))
            .collect();
        for _ in 0..params.points_per_inner {
            let v = unit_sphere_sample(&mut rng, d);
            for (c, (vi, ci)) in v.iter().zip(center.iter()).enumerate() {
                points[[row, c]] = params.inner_radius * vi + ci;
            }
            labels.push(class as u32);
            row += 1;
        }
    }
    for _ in 0..params.outer_points {
        let v = unit_sphere_sample(&mut rng, d);
        for (c, vi) in v.iter().enumerate() {
            points[[row, c]] = params.outer_radius * vi;
        }
        labels.push(params.n_inner_spheres as u32);
        row += 1;
    }
    LabeledDataset {
        data: Dataset::new(points, Some(labels)).expect("generated data is finite"),
        name: "spheres".to_string(),
    }
}

/// Uniform point on the unit sphere via a normalized isotropic Gaussian draw.
fn unit_sphere_sample(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-12 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

const IDX_MAGIC_IMAGES: u32 = 0x0000_0803;
const IDX_MAGIC_LABELS: u32 = 0x0000_0801;

/// Loads an IDX image/label file pair (big-endian MNIST-style binaries).
/// Pixels are flattened row-major and scaled to `[0,1]`.
pub fn load_idx(
    images_path: impl AsRef<Path>,
    labels_path: impl AsRef<Path>,
) -> Result<LabeledDataset> {
    let (images_path, labels_path) = (images_path.as_ref(), labels_path.as_ref());
    let images = std::fs::read(images_path)?;
    let labels = std::fs::read(labels_path)?;

    let magic = read_be_u32(&images, 0, images_path)?;
    if magic != IDX_MAGIC_IMAGES {
        return Err(Error::Format(format!(
            "{}: bad image magic {magic:#010x} at byte 0, expected {IDX_MAGIC_IMAGES:#010x}",
            images_path.display()
        )));
    }
    let n = read_be_u32(&images, 4, images_path)? as usize;
    let rows = read_be_u32(&images, 8, images_path)? as usize;
    let cols = read_be_u32(&images, 12, images_path)? as usize;
    let expected = 16 + n * rows * cols;
    if images.len() != expected {
        return Err(Error::Format(format!(
            "{}: truncated at byte {} ({} bytes expected)",
            images_path.display(),
            images.len(),
            expected
        )));
    }

    let lmagic = read_be_u32(&labels, 0, labels_path)?;
    if lmagic != IDX_MAGIC_LABELS {
        return Err(Error::Format(format!(
            "{}: bad label magic {lmagic:#010x} at byte 0, expected {IDX_MAGIC_LABELS:#010x}",
            labels_path.display()
        )));
    }
    let ln = read_be_u32(&labels, 4, labels_path)? as usize;
    if labels.len() != 8 + ln {
        return Err(Error::Format(format!(
            "{}: truncated at byte {} ({} bytes expected)",
            labels_path.display(),
            labels.len(),
            8 + ln
        )));
    }
    if ln != n {
        return Err(Error::Format(format!(
            "image count {n} does not match label count {ln}"
        )));
    }

    let d = rows * cols;
    let mut points = Array2::<f64>::zeros((n, d));
    for i in 0..n {
        for j in 0..d {
            points[[i, j]] = images[16 + i * d + j] as f64 / 255.0;
        }
    }
    let label_vec: Vec<u32> = labels[8..].iter().map(|&b| b as u32).collect();
    let name = images_path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "idx".to_string());
    Ok(LabeledDataset {
        data: Dataset::new(points, Some(label_vec))?,
        name,
    })
}

fn read_be_u32(bytes: &[u8], offset: usize, path: &Path) -> Result<u32> {
    let slice: [u8; 4] = bytes
        .get(offset..offset + 4)
        .and_then(|s| s.try_into().ok())
        .ok_or_else(|| {
            Error::Format(format!("{}: truncated at byte {offset}", path.display()))
        })?;
    Ok(u32::from_be_bytes(slice))
}

/// Loads a rectangular numeric CSV. A non-numeric first line is treated as a
/// header and skipped. With `has_labels` the trailing column is read as an
/// integer class id; otherwise all labels are 0.
pub fn load_csv(path: impl AsRef<Path>, has_labels: bool) -> Result<LabeledDataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| {
        Error::Io(std::io::Error::new(
            e.kind(),
            format!("{}: {e}", path.display()),
        ))
    })?;
    let reader = BufReader::new(file);
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut labels: Vec<u32> = Vec::new();
    let mut width = None;
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').collect();
        let parsed: std::result::Result<Vec<f64>, _> =
            cells.iter().map(|c| c.trim().parse::<f64>()).collect();
        let parsed = match parsed {
            Ok(p) => p,
            Err(_) if lineno == 0 => continue, // header
            Err(_) => {
                return Err(Error::Format(format!(
                    "{}: non-numeric cell at line {}",
                    path.display(),
                    lineno + 1
                )))
            }
        };
        match width {
            None => width = Some(parsed.len()),
            Some(w) if w != parsed.len() => {
                return Err(Error::Format(format!(
                    "{}: ragged row at line {} ({} cells, expected {w})",
                    path.display(),
                    lineno + 1,
                    parsed.len()
                )))
            }
            _ => {}
        }
        if has_labels {
            let (label, feats) = parsed.split_last().ok_or_else(|| {
                Error::Format(format!("{}: empty row at line {}", path.display(), lineno + 1))
            })?;
            labels.push(*label as u32);
            rows.push(feats.to_vec());
        } else {
            labels.push(0);
            rows.push(parsed);
        }
    }
    if rows.is_empty() {
        return Err(Error::Format(format!("{}: empty file", path.display())));
    }
    let d = rows[0].len();
    if d == 0 {
        return Err(Error::Format(format!(
            "{}: rows have no feature columns",
            path.display()
        )));
    }
    let flat: Vec<f64> = rows.into_iter().flatten().collect();
    let n = flat.len() / d;
    let points = Array2::from_shape_vec((n, d), flat).expect("rectangular by construction");
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "csv".to_string());
    Ok(LabeledDataset {
        data: Dataset::new(points, Some(labels))?,
        name,
    })
}

/// Writes a 2-D embedding as CSV with header `x,y,label`, 12 significant
/// digits per coordinate (round-trips through [`load_csv`] to < 1e-9).
pub fn save_embedding(
    positions: &Array2<f64>,
    labels: Option<&[u32]>,
    path: impl AsRef<Path>,
) -> Result<()> {
    let path = path.as_ref();
    if positions.ncols() != 2 {
        return Err(Error::InvalidParameter(format!(
            "embedding must be 2-D, got {} columns",
            positions.ncols()
        )));
    }
    let mut file = File::create(path)?;
    writeln!(file, "x,y,label")?;
    for i in 0..positions.nrows() {
        let label = labels.map(|l| l[i]).unwrap_or(0);
        writeln!(
            file,
            "{:.11e},{:.11e},{label}",
            positions[[i, 0]],
            positions[[i, 1]]
        )?;
    }
    Ok(())
}

/// Reads an embedding CSV written by [`save_embedding`].
pub fn load_embedding(path: impl AsRef<Path>) -> Result<(Array2<f64>, Vec<u32>)> {
    let path = path.as_ref();
    let ds = load_csv(path, true)?;
    if ds.data.dim() != 2 {
        return Err(Error::Format(format!(
            "{}: embedding must have columns x,y,label",
            path.display()
        )));
    }
    let labels = ds.labels().to_vec();
    Ok((ds.data.points, labels))
}

/// Class-stratified subsample of `m` points, deterministic for a given seed.
/// Per-class quotas follow the largest-remainder rule, so proportions are
/// preserved to within one point per class.
pub fn subsample(dataset: &LabeledDataset, m: usize, seed: u64) -> Result<LabeledDataset> {
    let n = dataset.n();
    if m > n {
        return Err(Error::InvalidParameter(format!(
            "subsample size {m} exceeds dataset size {n}"
        )));
    }
    let labels = dataset.labels();
    let mut classes: Vec<u32> = labels.to_vec();
    classes.sort_unstable();
    classes.dedup();

    let mut by_class: Vec<(u32, Vec<usize>)> = classes
        .iter()
        .map(|&c| {
            (
                c,
                (0..n).filter(|&i| labels[i] == c).collect::<Vec<usize>>(),
            )
        })
        .collect();

    // Largest-remainder quotas, ties by class id.
    let mut quotas: Vec<usize> = Vec::with_capacity(by_class.len());
    let mut remainders: Vec<(f64, usize)> = Vec::new();
    let mut assigned = 0usize;
    for (ci, (_, idxs)) in by_class.iter().enumerate() {
        let exact = m as f64 * idxs.len() as f64 / n as f64;
        let q = exact.floor() as usize;
        quotas.push(q);
        assigned += q;
        remainders.push((exact - q as f64, ci));
    }
    remainders.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
    for &(_, ci) in remainders.iter().take(m - assigned) {
        quotas[ci] += 1;
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut selected: Vec<usize> = Vec::with_capacity(m);
    for ((_, idxs), &q) in by_class.iter_mut().zip(quotas.iter()) {
        // Partial Fisher-Yates: the first q slots become the sample.
        for pos in 0..q.min(idxs.len().saturating_sub(1)) {
            let swap = rng.gen_range(pos..idxs.len());
            idxs.swap(pos, swap);
        }
        selected.extend_from_slice(&idxs[..q]);
    }
    selected.sort_unstable();

    let d = dataset.data.dim();
    let mut points = Array2::<f64>::zeros((selected.len(), d));
    let mut out_labels = Vec::with_capacity(selected.len());
    for (r, &i) in selected.iter().enumerate() {
        points.row_mut(r).assign(&dataset.data.points.row(i));
        out_labels.push(labels[i]);
    }
    Ok(LabeledDataset {
        data: Dataset::new(points, Some(out_labels))?,
        name: format!("{}-sub{}", dataset.name, m),
    })
}
