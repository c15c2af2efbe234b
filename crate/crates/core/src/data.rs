//! Dataset ingestion: IDX files, synthetic blobs, the fixture container and
//! the labeled / pool / test split.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::io::Read;
use std::path::Path;

use flate2::read::GzDecoder;

use crate::error::{Error, Result};
use crate::rng::StreamKey;
use crate::tensor::Tensor;

/// Byte to `[0, 1]`.
pub fn normalize(byte: u8) -> f64 {
    f64::from(byte) / 255.0
}

pub fn normalize_bytes(bytes: &[u8]) -> Vec<f64> {
    bytes.iter().copied().map(normalize).collect()
}

const IDX_UBYTE: u8 = 0x08;

/// A decoded IDX array of unsigned bytes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IdxArray {
    pub dims: Vec<usize>,
    pub data: Vec<u8>,
}

/// Decodes an IDX byte stream (`00 00 08 NDIM`, big-endian u32 dims, payload).
pub fn parse_idx(bytes: &[u8]) -> Result<IdxArray> {
    if bytes.len() < 4 {
        return Err(Error::Idx(format!("{} bytes is too short for a header", bytes.len())));
    }
    if bytes[0] != 0 || bytes[1] != 0 || bytes[2] != IDX_UBYTE || bytes[3] == 0 {
        return Err(Error::Idx(format!(
            "bad magic {:02x} {:02x} {:02x} {:02x}",
            bytes[0], bytes[1], bytes[2], bytes[3]
        )));
    }
    let ndim = bytes[3] as usize;
    let header = 4 + 4 * ndim;
    if bytes.len() < header {
        return Err(Error::Idx(format!("header needs {header} bytes, got {}", bytes.len())));
    }
    let dims: Vec<usize> = bytes[4..header]
        .chunks_exact(4)
        .map(|c| u32::from_be_bytes([c[0], c[1], c[2], c[3]]) as usize)
        .collect();
    let count = dims
        .iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .ok_or_else(|| Error::Idx(format!("dimensions {dims:?} overflow")))?;
    let payload = &bytes[header..];
    if payload.len() < count {
        return Err(Error::Idx(format!(
            "truncated payload: expected {count} bytes, got {}",
            payload.len()
        )));
    }
    if payload.len() > count {
        return Err(Error::Idx(format!(
            "{} trailing bytes after payload",
            payload.len() - count
        )));
    }
    Ok(IdxArray {
        dims,
        data: payload.to_vec(),
    })
}

pub fn encode_idx(array: &IdxArray) -> Result<Vec<u8>> {
    if array.dims.is_empty() || array.dims.len() > 255 {
        return Err(Error::Idx(format!("{} dimensions cannot be encoded", array.dims.len())));
    }
    let count: usize = array.dims.iter().product();
    if count != array.data.len() {
        return Err(Error::Idx(format!(
            "dims {:?} do not match {} bytes",
            array.dims,
            array.data.len()
        )));
    }
    let mut out = vec![0, 0, IDX_UBYTE, array.dims.len() as u8];
    for &d in &array.dims {
        let d = u32::try_from(d).map_err(|_| Error::Idx(format!("dimension {d} exceeds u32")))?;
        out.extend_from_slice(&d.to_be_bytes());
    }
    out.extend_from_slice(&array.data);
    Ok(out)
}

/// Reads an IDX file, gunzipping it first when it starts with the gzip magic.
pub fn read_idx_file(path: &Path) -> Result<IdxArray> {
    let raw = std::fs::read(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    let bytes = if raw.starts_with(&[0x1f, 0x8b]) {
        let mut out = Vec::new();
        GzDecoder::new(raw.as_slice())
            .read_to_end(&mut out)
            .map_err(|e| Error::io(format!("decompressing {}", path.display()), e))?;
        out
    } else {
        raw
    };
    parse_idx(&bytes).map_err(|e| Error::Idx(format!("{}: {e}", path.display())))
}

#[derive(Clone, Debug, PartialEq)]
pub struct DatasetMeta {
    pub dim: usize,
    /// `(height, width)` when samples are images.
    pub grid: Option<(usize, usize)>,
    pub classes: usize,
    pub flip_safe: bool,
}

/// Images (`count x dim`, row-major, values in `[0, 1]`) and class labels
/// `0..classes`.
#[derive(Clone, Debug, PartialEq)]
pub struct RawDataset {
    pub images: Vec<f64>,
    pub labels: Vec<usize>,
    pub meta: DatasetMeta,
}

impl RawDataset {
    pub fn new(images: Vec<f64>, labels: Vec<usize>, meta: DatasetMeta) -> Result<Self> {
        let ds = RawDataset { images, labels, meta };
        ds.validate()?;
        Ok(ds)
    }

    pub fn validate(&self) -> Result<()> {
        let m = &self.meta;
        if m.dim == 0 || m.classes < 2 {
            return Err(Error::InvalidArgument(format!(
                "dim {} and {} classes",
                m.dim, m.classes
            )));
        }
        if let Some((h, w)) = m.grid {
            if h * w != m.dim {
                return Err(Error::InvalidArgument(format!(
                    "grid {h}x{w} does not match dim {}",
                    m.dim
                )));
            }
        }
        if self.images.len() != self.labels.len() * m.dim {
            return Err(Error::InvalidArgument(format!(
                "{} pixel values for {} labels of dim {}",
                self.images.len(),
                self.labels.len(),
                m.dim
            )));
        }
        if let Some(&bad) = self.labels.iter().find(|&&y| y >= m.classes) {
            return Err(Error::InvalidArgument(format!("label {bad} outside 0..{}", m.classes)));
        }
        if let Some(&bad) = self.images.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::InvalidArgument(format!("pixel value {bad} outside [0, 1]")));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn image(&self, i: usize) -> &[f64] {
        &self.images[i * self.meta.dim..(i + 1) * self.meta.dim]
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.meta.classes];
        for &y in &self.labels {
            counts[y] += 1;
        }
        counts
    }

    /// Builds a dataset from an image IDX array (`count x h x w` or
    /// `count x d`) and a label IDX array. The class count is `max label + 1`
    /// unless given.
    pub fn from_idx(images: &IdxArray, labels: &IdxArray, classes: Option<usize>) -> Result<Self> {
        if labels.dims.len() != 1 {
            return Err(Error::Idx(format!("labels must be 1-d, got dims {:?}", labels.dims)));
        }
        let count = labels.dims[0];
        if images.dims.first() != Some(&count) || images.dims.len() < 2 {
            return Err(Error::Idx(format!(
                "{} labels do not match image dims {:?}",
                count, images.dims
            )));
        }
        let dim: usize = images.dims[1..].iter().product();
        let grid = (images.dims.len() == 3).then(|| (images.dims[1], images.dims[2]));
        let labels: Vec<usize> = labels.data.iter().map(|&b| b as usize).collect();
        let classes = classes.unwrap_or_else(|| labels.iter().max().map_or(0, |m| m + 1).max(2));
        RawDataset::new(
            normalize_bytes(&images.data),
            labels,
            DatasetMeta {
                dim,
                grid,
                classes,
                flip_safe: false,
            },
        )
    }

    pub fn load_idx(images: &Path, labels: &Path, classes: Option<usize>) -> Result<Self> {
        RawDataset::from_idx(&read_idx_file(images)?, &read_idx_file(labels)?, classes)
    }
}

/// Gaussian blobs whose class means sit evenly on a circle through the
/// center of `[0, 1]^d`, clipped to the cube.
///
/// The circle's two axes split the coordinates in halves (even and odd
/// coordinates) so every coordinate carries class signal.
pub fn make_synthetic(
    n_per_class: usize,
    classes: usize,
    dim: usize,
    blob_spread: f64,
    seed: u64,
) -> Result<RawDataset> {
    if classes < 2 || dim < 2 || n_per_class == 0 {
        return Err(Error::InvalidArgument(format!(
            "synthetic data needs C >= 2, d >= 2 and n_per_class >= 1 (got {classes}, {dim}, {n_per_class})"
        )));
    }
    if !(blob_spread >= 0.0 && blob_spread.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "blob spread {blob_spread} must be finite and >= 0"
        )));
    }
    let means = synthetic_means(classes, dim);
    let mut rng = StreamKey::root(seed).tag("synthetic").stream();
    let mut images = Vec::with_capacity(n_per_class * classes * dim);
    let mut labels = Vec::with_capacity(n_per_class * classes);
    for _ in 0..n_per_class {
        for (c, mean) in means.iter().enumerate() {
            for &m in mean {
                images.push((m + blob_spread * rng.normal()).clamp(0.0, 1.0));
            }
            labels.push(c);
        }
    }
    RawDataset::new(
        images,
        labels,
        DatasetMeta {
            dim,
            grid: None,
            classes,
            flip_safe: false,
        },
    )
}

/// Radius 0.4 per coordinate keeps the means inside the cube.
pub fn synthetic_means(classes: usize, dim: usize) -> Vec<Vec<f64>> {
    (0..classes)
        .map(|c| {
            let theta = 2.0 * PI * c as f64 / classes as f64;
            (0..dim)
                .map(|j| 0.5 + 0.4 * if j % 2 == 0 { theta.cos() } else { theta.sin() })
                .collect()
        })
        .collect()
}

const CONTAINER_MAGIC: &[u8; 4] = b"BGDS";
const CONTAINER_VERSION: u32 = 1;

/// Fixed header then little-endian f64 pixels and u64 labels.
pub fn encode_container(ds: &RawDataset) -> Vec<u8> {
    let m = &ds.meta;
    let (h, w) = m.grid.unwrap_or((0, 0));
    let mut out = Vec::with_capacity(49 + 8 * (ds.images.len() + ds.labels.len()));
    out.extend_from_slice(CONTAINER_MAGIC);
    out.extend_from_slice(&CONTAINER_VERSION.to_le_bytes());
    for v in [ds.len(), m.dim, m.classes, h, w] {
        out.extend_from_slice(&(v as u64).to_le_bytes());
    }
    out.push(u8::from(m.flip_safe));
    for v in &ds.images {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for &y in &ds.labels {
        out.extend_from_slice(&(y as u64).to_le_bytes());
    }
    out
}

struct Cursor<'a> {
    bytes: &'a [u8],
    at: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.at.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| Error::Container(format!("truncated at byte {}", self.at)))?;
        let s = &self.bytes[self.at..end];
        self.at = end;
        Ok(s)
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn usize(&mut self) -> Result<usize> {
        usize::try_from(self.u64()?).map_err(|_| Error::Container("size exceeds usize".into()))
    }
}

pub fn decode_container(bytes: &[u8]) -> Result<RawDataset> {
    let mut c = Cursor { bytes, at: 0 };
    if c.take(4)? != CONTAINER_MAGIC {
        return Err(Error::Container("bad magic".into()));
    }
    let version = u32::from_le_bytes(c.take(4)?.try_into().expect("4 bytes"));
    if version != CONTAINER_VERSION {
        return Err(Error::Container(format!("unsupported version {version}")));
    }
    let count = c.usize()?;
    let dim = c.usize()?;
    let classes = c.usize()?;
    let (h, w) = (c.usize()?, c.usize()?);
    let flip_safe = c.take(1)?[0] != 0;
    let n = count
        .checked_mul(dim)
        .filter(|n| n.checked_mul(8).is_some())
        .ok_or_else(|| Error::Container("size overflow".into()))?;
    let images: Vec<f64> = c
        .take(n * 8)?
        .chunks_exact(8)
        .map(|b| f64::from_le_bytes(b.try_into().expect("8 bytes")))
        .collect();
    let labels = (0..count).map(|_| c.usize()).collect::<Result<Vec<_>>>()?;
    if c.at != bytes.len() {
        return Err(Error::Container(format!("{} trailing bytes", bytes.len() - c.at)));
    }
    let meta = DatasetMeta {
        dim,
        grid: (h > 0).then_some((h, w)),
        classes,
        flip_safe,
    };
    RawDataset::new(images, labels, meta).map_err(|e| Error::Container(e.to_string()))
}

pub fn write_container(path: &Path, ds: &RawDataset) -> Result<()> {
    std::fs::write(path, encode_container(ds)).map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

pub fn read_container(path: &Path) -> Result<RawDataset> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    decode_container(&bytes)
}

/// Where a labeled example came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Provenance {
    /// Initial labeled split, with the source dataset index.
    Initial(u64),
    /// Acquired from the pool through the oracle.
    Acquired(u64),
    /// Produced by the generator or a transform.
    Generated,
}

impl Provenance {
    pub fn is_real(self) -> bool {
        !matches!(self, Provenance::Generated)
    }
}

/// The growing training set.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledSet {
    dim: usize,
    x: Vec<f64>,
    y: Vec<usize>,
    provenance: Vec<Provenance>,
}

impl LabeledSet {
    pub fn new(dim: usize) -> Self {
        LabeledSet {
            dim,
            x: Vec::new(),
            y: Vec::new(),
            provenance: Vec::new(),
        }
    }

    pub fn push(&mut self, x: &[f64], y: usize, provenance: Provenance) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::shape(
                "labeled push",
                format!("sample of {} values, dim {}", x.len(), self.dim),
            ));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("labeled sample".into()));
        }
        self.x.extend_from_slice(x);
        self.y.push(y);
        self.provenance.push(provenance);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn x(&self, i: usize) -> &[f64] {
        &self.x[i * self.dim..(i + 1) * self.dim]
    }

    pub fn y(&self, i: usize) -> usize {
        self.y[i]
    }

    pub fn labels(&self) -> &[usize] {
        &self.y
    }

    pub fn provenance(&self, i: usize) -> Provenance {
        self.provenance[i]
    }

    pub fn real_count(&self) -> usize {
        self.provenance.iter().filter(|p| p.is_real()).count()
    }

    /// Rows `idx` as a `len x dim` tensor plus their labels.
    pub fn batch(&self, idx: &[usize]) -> Result<(Tensor, Vec<usize>)> {
        let rows: Vec<&[f64]> = idx.iter().map(|&i| self.x(i)).collect();
        Ok((Tensor::stack_rows(&rows)?, idx.iter().map(|&i| self.y[i]).collect()))
    }
}

/// Unlabeled pool. Items keep their source dataset index as a stable id and
/// are listed in ascending id order; labels stay hidden until
/// [`Pool::oracle_label`] removes the item.
#[derive(Clone, Debug, PartialEq)]
pub struct Pool {
    dim: usize,
    items: BTreeMap<u64, (Vec<f64>, usize)>,
    acquired: BTreeMap<u64, usize>,
    order: Vec<u64>,
}

impl Pool {
    fn new(dim: usize) -> Self {
        Pool {
            dim,
            items: BTreeMap::new(),
            acquired: BTreeMap::new(),
            order: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Remaining ids in ascending order; positions index into this list.
    pub fn ids(&self) -> &[u64] {
        &self.order
    }

    pub fn x_at(&self, position: usize) -> &[f64] {
        &self.items[&self.order[position]].0
    }

    pub fn x_by_id(&self, id: u64) -> Option<&[f64]> {
        self.items.get(&id).map(|(x, _)| x.as_slice())
    }

    pub fn acquired_count(&self) -> usize {
        self.acquired.len()
    }

    pub fn was_acquired(&self, id: u64) -> bool {
        self.acquired.contains_key(&id)
    }

    /// Reveals the label of `id` and removes it from the pool.
    pub fn oracle_label(&mut self, id: u64) -> Result<(Vec<f64>, usize)> {
        if self.acquired.contains_key(&id) {
            return Err(Error::AlreadyLabeled(id as usize));
        }
        let (x, y) = self
            .items
            .remove(&id)
            .ok_or_else(|| Error::InvalidArgument(format!("pool has no item with id {id}")))?;
        self.acquired.insert(id, y);
        let pos = self.order.binary_search(&id).expect("order mirrors items");
        self.order.remove(pos);
        Ok((x, y))
    }
}

/// Labeled set, pool and test split of one experiment.
#[derive(Clone, Debug, PartialEq)]
pub struct DatasetState {
    pub meta: DatasetMeta,
    pub labeled: LabeledSet,
    pub pool: Pool,
    pub test_x: Tensor,
    pub test_y: Vec<usize>,
    pub generated_count: usize,
    /// Initial labeled plus pool size.
    pub original_train_count: usize,
}

impl DatasetState {
    pub fn add_generated(&mut self, x: &[f64], y: usize) -> Result<()> {
        self.labeled.push(x, y, Provenance::Generated)?;
        self.generated_count += 1;
        Ok(())
    }

    /// Acquires pool item `id` into the labeled set and returns its sample.
    pub fn acquire(&mut self, id: u64) -> Result<(Vec<f64>, usize)> {
        let (x, y) = self.pool.oracle_label(id)?;
        self.labeled.push(&x, y, Provenance::Acquired(id))?;
        Ok((x, y))
    }
}

/// Splits into test, initial labeled and pool sets.
///
/// The permutation is drawn from `seed`. With `stratified`, the initial set
/// takes samples round-robin over classes in permutation order, so every
/// class with data appears once `n_init >= classes`.
pub fn split(ds: &RawDataset, n_init: usize, n_test: usize, seed: u64, stratified: bool) -> Result<DatasetState> {
    let n = ds.len();
    if n_init == 0 || n_test == 0 {
        return Err(Error::InvalidArgument(
            "initial labeled and test sizes must be positive".into(),
        ));
    }
    if n_init + n_test > n {
        return Err(Error::InvalidArgument(format!(
            "insufficient data: {n_init} initial + {n_test} test > {n} samples"
        )));
    }
    let mut perm: Vec<usize> = (0..n).collect();
    StreamKey::root(seed).tag("split").stream().shuffle(&mut perm);
    let (test_idx, rest) = perm.split_at(n_test);

    let init: Vec<usize> = if stratified {
        let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); ds.meta.classes];
        for &i in rest {
            by_class[ds.labels[i]].push(i);
        }
        let mut picked = Vec::with_capacity(n_init);
        let mut round = 0;
        while picked.len() < n_init {
            for class in &by_class {
                if picked.len() < n_init && round < class.len() {
                    picked.push(class[round]);
                }
            }
            round += 1;
        }
        picked
    } else {
        rest[..n_init].to_vec()
    };
    let mut in_init = vec![false; n];
    for &i in &init {
        in_init[i] = true;
    }

    let dim = ds.meta.dim;
    let mut labeled = LabeledSet::new(dim);
    for &i in &init {
        labeled.push(ds.image(i), ds.labels[i], Provenance::Initial(i as u64))?;
    }
    let mut pool = Pool::new(dim);
    for &i in rest.iter().filter(|&&i| !in_init[i]) {
        pool.items.insert(i as u64, (ds.image(i).to_vec(), ds.labels[i]));
    }
    pool.order = pool.items.keys().copied().collect();

    let test_rows: Vec<&[f64]> = test_idx.iter().map(|&i| ds.image(i)).collect();
    Ok(DatasetState {
        meta: ds.meta.clone(),
        labeled,
        original_train_count: n - n_test,
        pool,
        test_x: Tensor::stack_rows(&test_rows)?,
        test_y: test_idx.iter().map(|&i| ds.labels[i]).collect(),
        generated_count: 0,
    })
}
