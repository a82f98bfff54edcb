//! The five benchmark kernels as front-end functions, seeded input
//! generators with tunable locality, and the reuse-distance / LRU
//! characterization toolkit.

use crate::mem::{Buffer, MemImage};
use crate::scf::{parse_scf, ScfFunction};
use crate::types::ElemType;
use rand::distributions::Distribution;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::HashMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum KernelKind {
    Sls,
    Spmm,
    Mp,
    Kg,
    Spattn,
}

impl KernelKind {
    pub const ALL: [KernelKind; 5] = [
        KernelKind::Sls,
        KernelKind::Spmm,
        KernelKind::Mp,
        KernelKind::Kg,
        KernelKind::Spattn,
    ];

    pub fn name(self) -> &'static str {
        match self {
            KernelKind::Sls => "sls",
            KernelKind::Spmm => "spmm",
            KernelKind::Mp => "mp",
            KernelKind::Kg => "kg",
            KernelKind::Spattn => "spattn",
        }
    }

    pub fn from_name(s: &str) -> Option<KernelKind> {
        Self::ALL.iter().copied().find(|k| k.name() == s)
    }
}

pub const SLS_SRC: &str = r#"
// Segmented lookup-and-accumulate over an embedding table.
void sls(idxs: mref<? x idx>, ptrs: mref<? x idx>, vals: mref<? x ? x f32>,
         out: mref<? x ? x f32>, n_batches: idx, emb_len: idx) {
  for(idx b = 0; b < n_batches; b++) {
    idx beg = ptrs[b];
    idx end = ptrs[b + 1];
    for(idx p = beg; p < end; p++) {
      idx i = idxs[p];
      for(idx e = 0; e < emb_len; e++) {
        f32 val = vals[i, e];
        f32 acc = out[b, e];
        out[b, e] = acc + val;
      }
    }
  }
}
"#;

pub const SPMM_SRC: &str = r#"
// CSR sparse times dense: rescale each looked-up row and accumulate.
void spmm(ptrs: mref<? x idx>, idxs: mref<? x idx>, w: mref<? x f32>,
          emb: mref<? x ? x f32>, out: mref<? x ? x f32>,
          n_rows: idx, emb_len: idx) {
  for(idx v = 0; v < n_rows; v++) {
    idx beg = ptrs[v];
    idx end = ptrs[v + 1];
    for(idx p = beg; p < end; p++) {
      idx i = idxs[p];
      f32 a = w[p];
      for(idx e = 0; e < emb_len; e++) {
        f32 val = emb[i, e];
        f32 acc = out[v, e];
        out[v, e] = acc + a * val;
      }
    }
  }
}
"#;

pub const MP_SRC: &str = r#"
// Message passing: elementwise vertex*neighbor products scaled by the edge
// weight reduce into a workspace, which then rescales the vertex vector.
void mp(ptrs: mref<? x idx>, idxs: mref<? x idx>, w: mref<? x f32>,
        vtx: mref<? x ? x f32>, nbr: mref<? x ? x f32>, tmp: mref<? x f32>,
        out: mref<? x ? x f32>, n_vertices: idx, emb_len: idx) {
  for(idx v = 0; v < n_vertices; v++) {
    idx beg = ptrs[v];
    idx end = ptrs[v + 1];
    for(idx e0 = 0; e0 < emb_len; e0++) {
      tmp[e0] = 0.0;
    }
    for(idx p = beg; p < end; p++) {
      idx i = idxs[p];
      f32 s = w[p];
      for(idx e = 0; e < emb_len; e++) {
        f32 a = vtx[v, e];
        f32 b = nbr[i, e];
        f32 t = tmp[e];
        tmp[e] = t + a * b * s;
      }
    }
    for(idx e1 = 0; e1 < emb_len; e1++) {
      f32 t = tmp[e1];
      f32 a = vtx[v, e1];
      f32 acc = out[v, e1];
      out[v, e1] = acc + t * a;
    }
  }
}
"#;

pub const KG_SRC: &str = r#"
// Knowledge-graph scoring: one lookup triple per sample, squared norm of
// head + relation - tail accumulated per sample.
void kg(h_idx: mref<? x idx>, r_idx: mref<? x idx>, t_idx: mref<? x idx>,
        ent: mref<? x ? x f32>, rel: mref<? x ? x f32>, out: mref<? x f32>,
        n_samples: idx, emb_len: idx) {
  for(idx s = 0; s < n_samples; s++) {
    idx hi = h_idx[s];
    idx ri = r_idx[s];
    idx ti = t_idx[s];
    for(idx e = 0; e < emb_len; e++) {
      f32 hv = ent[hi, e];
      f32 rv = rel[ri, e];
      f32 tv = ent[ti, e];
      f32 d = hv + rv - tv;
      f32 acc = out[s];
      out[s] = acc + d * d;
    }
  }
}
"#;

pub const SPATTN_SRC: &str = r#"
// Block-sparse attention gather: replicate each gathered key vector into
// every query slot of its block. Pure copy, no compute.
void spattn(kids: mref<? x idx>, keys: mref<? x ? x f32>, out: mref<? x ? x f32>,
            n_qblocks: idx, bpq: idx, k_block: idx, q_block: idx, emb_len: idx) {
  for(idx qb = 0; qb < n_qblocks; qb++) {
    for(idx j = 0; j < bpq; j++) {
      idx pos = qb * bpq + j;
      idx kb = kids[pos];
      for(idx kt = 0; kt < k_block; kt++) {
        idx krow = kb * k_block + kt;
        for(idx qt = 0; qt < q_block; qt++) {
          idx orow = (pos * k_block + kt) * q_block + qt;
          for(idx e = 0; e < emb_len; e++) {
            f32 kv = keys[krow, e];
            out[orow, e] = kv;
          }
        }
      }
    }
  }
}
"#;

#[derive(Debug, Clone, thiserror::Error)]
pub enum WorkloadError {
    #[error("inconsistent dims: {0}")]
    Dims(String),
}

/// Build one of the five kernels. The returned function is dimension-free
/// (sizes are runtime-bound scalars); `dims` is validated for use with
/// `gen_inputs`.
pub fn build_kernel(kind: KernelKind, dims: &KernelDims) -> Result<ScfFunction, WorkloadError> {
    dims.validate(kind)?;
    let src = kernel_src(kind);
    Ok(parse_scf(src).expect("embedded kernel sources parse"))
}

pub fn kernel_src(kind: KernelKind) -> &'static str {
    match kind {
        KernelKind::Sls => SLS_SRC,
        KernelKind::Spmm => SPMM_SRC,
        KernelKind::Mp => MP_SRC,
        KernelKind::Kg => KG_SRC,
        KernelKind::Spattn => SPATTN_SRC,
    }
}

/// Sizing knobs for input generation.
#[derive(Debug, Clone)]
pub struct KernelDims {
    /// Segments (sls), rows (spmm), vertices (mp), samples (kg), or query
    /// blocks (spattn).
    pub batches: u64,
    /// Average lookups per segment/row/vertex; exact when `uniform_segments`.
    pub lookups: u64,
    /// Embedding-table rows (or key rows for spattn before blocking).
    pub rows: u64,
    pub emb_len: u64,
    /// Fixed-length segments instead of randomized lengths.
    pub uniform_segments: bool,
    /// spattn block geometry.
    pub bpq: u64,
    pub k_block: u64,
    pub q_block: u64,
}

impl Default for KernelDims {
    fn default() -> Self {
        KernelDims {
            batches: 4,
            lookups: 8,
            rows: 64,
            emb_len: 16,
            uniform_segments: false,
            bpq: 2,
            k_block: 2,
            q_block: 2,
        }
    }
}

impl KernelDims {
    fn validate(&self, kind: KernelKind) -> Result<(), WorkloadError> {
        if self.rows == 0 || self.emb_len == 0 || self.batches == 0 {
            return Err(WorkloadError::Dims(
                "rows, emb_len and batches must be positive".into(),
            ));
        }
        if kind == KernelKind::Spattn {
            if self.bpq == 0 || self.k_block == 0 || self.q_block == 0 {
                return Err(WorkloadError::Dims(
                    "spattn block sizes must be positive".into(),
                ));
            }
            if !self.rows.is_multiple_of(self.k_block) {
                return Err(WorkloadError::Dims(format!(
                    "key rows {} must be a multiple of the key block size {}",
                    self.rows, self.k_block
                )));
            }
        }
        Ok(())
    }
}

/// Index-sequence locality presets: L0 uniform, L1 zipf(0.8), L2 zipf(1.2).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Locality {
    Uniform,
    Zipf(f64),
}

impl Locality {
    pub fn preset(name: &str) -> Option<Locality> {
        Some(match name {
            "L0" | "uniform" => Locality::Uniform,
            "L1" => Locality::Zipf(0.8),
            "L2" => Locality::Zipf(1.2),
            other => {
                let s = other.strip_prefix("zipf")?;
                return s.parse::<f64>().ok().map(Locality::Zipf);
            }
        })
    }
}

/// Deterministic index-sequence generator. Zipf draws are shuffled through a
/// seeded row permutation so hot rows land anywhere in the table.
pub fn gen_indices(rows: u64, count: u64, locality: Locality, seed: u64) -> Vec<u64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut perm: Vec<u64> = (0..rows).collect();
    for i in (1..perm.len()).rev() {
        let j = rng.gen_range(0..=i);
        perm.swap(i, j);
    }
    match locality {
        Locality::Uniform => (0..count).map(|_| rng.gen_range(0..rows)).collect(),
        Locality::Zipf(s) => {
            let dist = rand_distr::Zipf::new(rows, s).expect("valid zipf parameters");
            (0..count)
                .map(|_| {
                    let v = dist.sample(&mut rng) as u64;
                    perm[(v - 1).min(rows - 1) as usize]
                })
                .collect()
        }
    }
}

/// A CSR wrapper: row pointers plus column indices (values optional).
#[derive(Debug, Clone)]
pub struct CsrMatrix {
    pub ptrs: Vec<u64>,
    pub idxs: Vec<u64>,
    pub vals: Option<Vec<f32>>,
}

impl CsrMatrix {
    pub fn nnz(&self) -> usize {
        self.idxs.len()
    }
}

pub fn gen_csr(
    rows_out: u64,
    table_rows: u64,
    avg_lookups: u64,
    uniform: bool,
    locality: Locality,
    seed: u64,
    with_vals: bool,
) -> CsrMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e3779b97f4a7c15);
    let mut ptrs = Vec::with_capacity(rows_out as usize + 1);
    ptrs.push(0u64);
    let mut total = 0u64;
    for _ in 0..rows_out {
        let n = if uniform || avg_lookups == 0 {
            avg_lookups
        } else {
            rng.gen_range(0..=avg_lookups * 2)
        };
        total += n;
        ptrs.push(total);
    }
    let idxs = gen_indices(table_rows, total, locality, seed);
    let vals = with_vals.then(|| {
        (0..total)
            .map(|_| (rng.gen_range(1..=8) as f32) * 0.25)
            .collect()
    });
    CsrMatrix { ptrs, idxs, vals }
}

fn gen_table(rng: &mut ChaCha8Rng, rows: u64, emb_len: u64, integer_valued: bool) -> Buffer {
    let data: Vec<f32> = (0..rows * emb_len)
        .map(|_| {
            if integer_valued {
                rng.gen_range(0..16) as f32
            } else {
                rng.gen_range(0.0f32..1.0f32)
            }
        })
        .collect();
    Buffer::from_f32(vec![rows, emb_len], data)
}

/// Generate a full memory image for one kernel. `integer_valued` restricts
/// f32 payloads to small integers so order-independent oracles can compare
/// exactly.
pub fn gen_inputs(
    kind: KernelKind,
    dims: &KernelDims,
    locality: Locality,
    seed: u64,
    integer_valued: bool,
) -> MemImage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x2545F4914F6CDD1D) ^ 7);
    match kind {
        KernelKind::Sls => {
            let csr = gen_csr(
                dims.batches,
                dims.rows,
                dims.lookups,
                dims.uniform_segments,
                locality,
                seed,
                false,
            );
            MemImage::new()
                .with_buffer("ptrs", Buffer::from_index(vec![dims.batches + 1], csr.ptrs))
                .with_buffer(
                    "idxs",
                    Buffer::from_index(vec![csr.idxs.len() as u64], csr.idxs),
                )
                .with_buffer("vals", gen_table(&mut rng, dims.rows, dims.emb_len, integer_valued))
                .with_buffer(
                    "out",
                    Buffer::zeros(ElemType::F32, vec![dims.batches, dims.emb_len]),
                )
                .with_scalar("n_batches", dims.batches)
                .with_scalar("emb_len", dims.emb_len)
        }
        KernelKind::Spmm => {
            let csr = gen_csr(
                dims.batches,
                dims.rows,
                dims.lookups,
                dims.uniform_segments,
                locality,
                seed,
                true,
            );
            let nnz = csr.idxs.len() as u64;
            MemImage::new()
                .with_buffer("ptrs", Buffer::from_index(vec![dims.batches + 1], csr.ptrs))
                .with_buffer("idxs", Buffer::from_index(vec![nnz], csr.idxs))
                .with_buffer("w", Buffer::from_f32(vec![nnz], csr.vals.unwrap()))
                .with_buffer("emb", gen_table(&mut rng, dims.rows, dims.emb_len, integer_valued))
                .with_buffer(
                    "out",
                    Buffer::zeros(ElemType::F32, vec![dims.batches, dims.emb_len]),
                )
                .with_scalar("n_rows", dims.batches)
                .with_scalar("emb_len", dims.emb_len)
        }
        KernelKind::Mp => {
            let csr = gen_csr(
                dims.batches,
                dims.rows,
                dims.lookups,
                dims.uniform_segments,
                locality,
                seed,
                true,
            );
            let nnz = csr.idxs.len() as u64;
            MemImage::new()
                .with_buffer("ptrs", Buffer::from_index(vec![dims.batches + 1], csr.ptrs))
                .with_buffer("idxs", Buffer::from_index(vec![nnz], csr.idxs))
                .with_buffer("w", Buffer::from_f32(vec![nnz], csr.vals.unwrap()))
                .with_buffer("vtx", gen_table(&mut rng, dims.batches, dims.emb_len, integer_valued))
                .with_buffer("nbr", gen_table(&mut rng, dims.rows, dims.emb_len, integer_valued))
                .with_buffer("tmp", Buffer::zeros(ElemType::F32, vec![dims.emb_len]))
                .with_buffer(
                    "out",
                    Buffer::zeros(ElemType::F32, vec![dims.batches, dims.emb_len]),
                )
                .with_scalar("n_vertices", dims.batches)
                .with_scalar("emb_len", dims.emb_len)
        }
        KernelKind::Kg => {
            let n = dims.batches;
            let h = gen_indices(dims.rows, n, locality, seed ^ 1);
            let r = gen_indices(dims.rows, n, locality, seed ^ 2);
            let t = gen_indices(dims.rows, n, locality, seed ^ 3);
            MemImage::new()
                .with_buffer("h_idx", Buffer::from_index(vec![n], h))
                .with_buffer("r_idx", Buffer::from_index(vec![n], r))
                .with_buffer("t_idx", Buffer::from_index(vec![n], t))
                .with_buffer("ent", gen_table(&mut rng, dims.rows, dims.emb_len, integer_valued))
                .with_buffer("rel", gen_table(&mut rng, dims.rows, dims.emb_len, integer_valued))
                .with_buffer("out", Buffer::zeros(ElemType::F32, vec![n]))
                .with_scalar("n_samples", n)
                .with_scalar("emb_len", dims.emb_len)
        }
        KernelKind::Spattn => {
            let n_kblocks = dims.rows / dims.k_block;
            let kids = gen_indices(n_kblocks, dims.batches * dims.bpq, locality, seed);
            let out_rows = dims.batches * dims.bpq * dims.k_block * dims.q_block;
            MemImage::new()
                .with_buffer(
                    "kids",
                    Buffer::from_index(vec![dims.batches * dims.bpq], kids),
                )
                .with_buffer("keys", gen_table(&mut rng, dims.rows, dims.emb_len, integer_valued))
                .with_buffer("out", Buffer::zeros(ElemType::F32, vec![out_rows, dims.emb_len]))
                .with_scalar("n_qblocks", dims.batches)
                .with_scalar("bpq", dims.bpq)
                .with_scalar("k_block", dims.k_block)
                .with_scalar("q_block", dims.q_block)
                .with_scalar("emb_len", dims.emb_len)
        }
    }
}

/// Memrefs a kernel writes (the comparison targets for oracles).
pub fn kernel_outputs(kind: KernelKind) -> &'static [&'static str] {
    match kind {
        KernelKind::Mp => &["out", "tmp"],
        _ => &["out"],
    }
}

// ---------------------------------------------------------------------------
// Direct per-kernel oracles (independent of the compiler pipeline)
// ---------------------------------------------------------------------------

/// Straight-line Rust evaluation of a kernel over a memory image. Arithmetic
/// follows the same order as the front-end semantics.
pub fn direct_oracle(kind: KernelKind, inputs: &MemImage) -> MemImage {
    let mut img = inputs.clone();
    let getf = |img: &MemImage, name: &str, i: &[u64]| {
        img.buffer(name).unwrap().get(i).unwrap().as_f32().unwrap()
    };
    let geti = |img: &MemImage, name: &str, i: &[u64]| {
        img.buffer(name).unwrap().get(i).unwrap().as_index().unwrap()
    };
    let setf = |img: &mut MemImage, name: &str, i: &[u64], v: f32| {
        img.buffers
            .get_mut(name)
            .unwrap()
            .set(i, crate::types::Scalar::F32(v))
            .unwrap()
    };
    match kind {
        KernelKind::Sls => {
            let nb = img.scalar("n_batches").unwrap();
            let el = img.scalar("emb_len").unwrap();
            for b in 0..nb {
                for p in geti(&img, "ptrs", &[b])..geti(&img, "ptrs", &[b + 1]) {
                    let i = geti(&img, "idxs", &[p]);
                    for e in 0..el {
                        let v = getf(&img, "out", &[b, e]) + getf(&img, "vals", &[i, e]);
                        setf(&mut img, "out", &[b, e], v);
                    }
                }
            }
        }
        KernelKind::Spmm => {
            let nr = img.scalar("n_rows").unwrap();
            let el = img.scalar("emb_len").unwrap();
            for v in 0..nr {
                for p in geti(&img, "ptrs", &[v])..geti(&img, "ptrs", &[v + 1]) {
                    let i = geti(&img, "idxs", &[p]);
                    let a = getf(&img, "w", &[p]);
                    for e in 0..el {
                        let x = getf(&img, "out", &[v, e]) + a * getf(&img, "emb", &[i, e]);
                        setf(&mut img, "out", &[v, e], x);
                    }
                }
            }
        }
        KernelKind::Mp => {
            let nv = img.scalar("n_vertices").unwrap();
            let el = img.scalar("emb_len").unwrap();
            for v in 0..nv {
                let mut tmp = vec![0.0f32; el as usize];
                for p in geti(&img, "ptrs", &[v])..geti(&img, "ptrs", &[v + 1]) {
                    let i = geti(&img, "idxs", &[p]);
                    let s = getf(&img, "w", &[p]);
                    for e in 0..el {
                        tmp[e as usize] +=
                            getf(&img, "vtx", &[v, e]) * getf(&img, "nbr", &[i, e]) * s;
                    }
                }
                for e in 0..el {
                    let x = getf(&img, "out", &[v, e]) + tmp[e as usize] * getf(&img, "vtx", &[v, e]);
                    setf(&mut img, "out", &[v, e], x);
                    setf(&mut img, "tmp", &[e], tmp[e as usize]);
                }
            }
        }
        KernelKind::Kg => {
            let ns = img.scalar("n_samples").unwrap();
            let el = img.scalar("emb_len").unwrap();
            for s in 0..ns {
                let hi = geti(&img, "h_idx", &[s]);
                let ri = geti(&img, "r_idx", &[s]);
                let ti = geti(&img, "t_idx", &[s]);
                let mut acc = getf(&img, "out", &[s]);
                for e in 0..el {
                    let d = getf(&img, "ent", &[hi, e]) + getf(&img, "rel", &[ri, e])
                        - getf(&img, "ent", &[ti, e]);
                    acc += d * d;
                }
                setf(&mut img, "out", &[s], acc);
            }
        }
        KernelKind::Spattn => {
            let nq = img.scalar("n_qblocks").unwrap();
            let bpq = img.scalar("bpq").unwrap();
            let kb = img.scalar("k_block").unwrap();
            let qb = img.scalar("q_block").unwrap();
            let el = img.scalar("emb_len").unwrap();
            for q in 0..nq {
                for j in 0..bpq {
                    let pos = q * bpq + j;
                    let kid = geti(&img, "kids", &[pos]);
                    for kt in 0..kb {
                        for qt in 0..qb {
                            let orow = (pos * kb + kt) * qb + qt;
                            for e in 0..el {
                                let v = getf(&img, "keys", &[kid * kb + kt, e]);
                                setf(&mut img, "out", &[orow, e], v);
                            }
                        }
                    }
                }
            }
        }
    }
    img
}

// ---------------------------------------------------------------------------
// Reuse-distance characterization
// ---------------------------------------------------------------------------

/// Reuse-distance report: for every re-access, the number of distinct other
/// vectors touched since the previous access to the same vector.
#[derive(Debug, Clone, PartialEq)]
pub struct CdfReport {
    /// Sorted reuse distances of all re-accesses.
    pub distances: Vec<u64>,
    pub cold: u64,
    pub total: u64,
}

impl CdfReport {
    /// CDF over re-accesses: fraction of re-accesses with distance <= x.
    pub fn cdf(&self, x: u64) -> f64 {
        if self.distances.is_empty() {
            return 0.0;
        }
        let n = self.distances.partition_point(|d| *d <= x);
        n as f64 / self.distances.len() as f64
    }

    /// Distinct (distance, cdf) sample points.
    pub fn points(&self) -> Vec<(u64, f64)> {
        let mut out = Vec::new();
        let mut i = 0;
        while i < self.distances.len() {
            let d = self.distances[i];
            let mut j = i;
            while j < self.distances.len() && self.distances[j] == d {
                j += 1;
            }
            out.push((d, j as f64 / self.distances.len() as f64));
            i = j;
        }
        out
    }

    pub fn to_json(&self, capacities: &[u64], trace: &[u64]) -> String {
        let lru: serde_json::Map<String, serde_json::Value> = capacities
            .iter()
            .map(|c| (c.to_string(), serde_json::json!(lru_hit_rate(trace, *c))))
            .collect();
        serde_json::to_string_pretty(&serde_json::json!({
            "cold": self.cold,
            "re_accesses": self.distances.len(),
            "points": self
                .points()
                .iter()
                .map(|(d, c)| serde_json::json!([d, c]))
                .collect::<Vec<_>>(),
            "lru": lru,
        }))
        .unwrap()
    }
}

/// Stack-distance computation in O(n log n): a Fenwick tree over time marks
/// the most recent access of each live vector.
pub fn reuse_distance_cdf(trace: &[u64]) -> CdfReport {
    let n = trace.len();
    let mut fen = Fenwick::new(n + 1);
    let mut last: HashMap<u64, usize> = HashMap::new();
    let mut distances = Vec::new();
    let mut cold = 0u64;
    for (t, id) in trace.iter().enumerate() {
        match last.get(id) {
            None => cold += 1,
            Some(&prev) => {
                // Distinct vectors touched in (prev, t): each live vector
                // contributes one marker at its most recent access time.
                let marked = fen.sum_range(prev + 1, t);
                distances.push(marked as u64);
                fen.add(prev, -1);
            }
        }
        fen.add(t, 1);
        last.insert(*id, t);
    }
    distances.sort_unstable();
    CdfReport {
        distances,
        cold,
        total: n as u64,
    }
}

/// Brute-force oracle: scan back collecting the distinct-id set.
pub fn reuse_distance_brute(trace: &[u64]) -> CdfReport {
    let mut distances = Vec::new();
    let mut cold = 0u64;
    for (t, id) in trace.iter().enumerate() {
        let mut seen = std::collections::BTreeSet::new();
        let mut found = false;
        for k in (0..t).rev() {
            if trace[k] == *id {
                found = true;
                break;
            }
            seen.insert(trace[k]);
        }
        if found {
            distances.push(seen.len() as u64);
        } else {
            cold += 1;
        }
    }
    distances.sort_unstable();
    CdfReport {
        distances,
        cold,
        total: trace.len() as u64,
    }
}

/// Hit fraction of an LRU cache holding `capacity` vectors: a re-access hits
/// iff its stack distance is strictly below the capacity.
pub fn lru_hit_rate(trace: &[u64], capacity: u64) -> f64 {
    assert!(capacity >= 1, "capacity must be at least one vector");
    if trace.is_empty() {
        return 0.0;
    }
    let rep = reuse_distance_cdf(trace);
    let hits = rep.distances.partition_point(|d| *d < capacity);
    hits as f64 / trace.len() as f64
}

/// Plain LRU simulation used as the oracle for `lru_hit_rate`.
pub fn lru_simulate(trace: &[u64], capacity: u64) -> f64 {
    let mut stack: Vec<u64> = Vec::new();
    let mut hits = 0u64;
    for id in trace {
        if let Some(pos) = stack.iter().position(|x| x == id) {
            stack.remove(pos);
            if (pos as u64) < capacity {
                hits += 1;
            }
        }
        stack.insert(0, *id);
    }
    hits as f64 / trace.len() as f64
}

struct Fenwick {
    tree: Vec<i64>,
}

impl Fenwick {
    fn new(n: usize) -> Fenwick {
        Fenwick { tree: vec![0; n + 1] }
    }

    fn add(&mut self, i: usize, delta: i64) {
        let mut k = i + 1;
        while k < self.tree.len() {
            self.tree[k] += delta;
            k += k & k.wrapping_neg();
        }
    }

    fn prefix(&self, i: usize) -> i64 {
        let mut s = 0;
        let mut k = i + 1;
        while k > 0 {
            s += self.tree[k];
            k -= k & k.wrapping_neg();
        }
        s
    }

    /// Sum of markers over [lo, hi).
    fn sum_range(&self, lo: usize, hi: usize) -> i64 {
        if hi <= lo {
            return 0;
        }
        let hi_sum = self.prefix(hi - 1);
        let lo_sum = if lo == 0 { 0 } else { self.prefix(lo - 1) };
        hi_sum - lo_sum
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scf::{interpret_scf, verify_scf};

    #[test]
    fn kernels_parse_and_verify() {
        for kind in KernelKind::ALL {
            let f = build_kernel(kind, &KernelDims::default()).unwrap();
            verify_scf(&f).unwrap_or_else(|e| panic!("{}: {e}", kind.name()));
        }
    }

    #[test]
    fn kernels_match_direct_oracles() {
        for kind in KernelKind::ALL {
            let dims = KernelDims::default();
            let f = build_kernel(kind, &dims).unwrap();
            for seed in 0..3 {
                let inputs = gen_inputs(kind, &dims, Locality::Uniform, seed, true);
                let got = interpret_scf(&f, &inputs).unwrap();
                let want = direct_oracle(kind, &inputs);
                for out in kernel_outputs(kind) {
                    assert!(
                        got.buffer(out).unwrap().bit_eq(want.buffer(out).unwrap()),
                        "{} seed {seed} buffer {out}",
                        kind.name()
                    );
                }
            }
        }
    }

    #[test]
    fn sls_equals_dense_spmm_expansion() {
        // A 0/1 dense expansion of the CSR selection reproduces the SLS
        // output on integer-valued inputs.
        let dims = KernelDims {
            batches: 3,
            lookups: 4,
            rows: 8,
            emb_len: 5,
            ..Default::default()
        };
        let f = build_kernel(KernelKind::Sls, &dims).unwrap();
        let inputs = gen_inputs(KernelKind::Sls, &dims, Locality::Uniform, 11, true);
        let got = interpret_scf(&f, &inputs).unwrap();
        let ptrs = inputs.buffer("ptrs").unwrap();
        let idxs = inputs.buffer("idxs").unwrap();
        let vals = inputs.buffer("vals").unwrap();
        for b in 0..dims.batches {
            let mut row = vec![0u64; dims.rows as usize];
            let beg = ptrs.get(&[b]).unwrap().as_index().unwrap();
            let end = ptrs.get(&[b + 1]).unwrap().as_index().unwrap();
            for p in beg..end {
                row[idxs.get(&[p]).unwrap().as_index().unwrap() as usize] += 1;
            }
            for e in 0..dims.emb_len {
                let mut acc = 0.0f32;
                for (k, mult) in row.iter().enumerate() {
                    acc += *mult as f32 * vals.get(&[k as u64, e]).unwrap().as_f32().unwrap();
                }
                let got_v = got
                    .buffer("out")
                    .unwrap()
                    .get(&[b, e])
                    .unwrap()
                    .as_f32()
                    .unwrap();
                assert_eq!(acc, got_v, "b={b} e={e}");
            }
        }
    }

    #[test]
    fn kg_zero_relation_identical_entities_scores_zero() {
        let dims = KernelDims {
            batches: 4,
            rows: 4,
            emb_len: 6,
            ..Default::default()
        };
        let f = build_kernel(KernelKind::Kg, &dims).unwrap();
        let mut inputs = gen_inputs(KernelKind::Kg, &dims, Locality::Uniform, 0, true);
        // h == t, rel all-zero: the score must be exactly zero.
        let h = inputs.buffer("h_idx").unwrap().clone();
        inputs.buffers.insert("t_idx".into(), h);
        inputs.buffers.insert(
            "rel".into(),
            Buffer::zeros(ElemType::F32, vec![dims.rows, dims.emb_len]),
        );
        let out = interpret_scf(&f, &inputs).unwrap();
        for s in 0..dims.batches {
            assert_eq!(
                out.buffer("out").unwrap().get(&[s]).unwrap().as_f32().unwrap(),
                0.0
            );
        }
    }

    #[test]
    fn reuse_distance_examples() {
        // [A,B,A,B]: distances {1,1}, two cold accesses.
        let rep = reuse_distance_cdf(&[0, 1, 0, 1]);
        assert_eq!(rep.distances, vec![1, 1]);
        assert_eq!(rep.cold, 2);
        assert_eq!(rep.cdf(0), 0.0);
        assert_eq!(rep.cdf(1), 1.0);
        // [A,A]: immediate reuse.
        let rep = reuse_distance_cdf(&[3, 3]);
        assert_eq!(rep.distances, vec![0]);
        assert_eq!(rep.cdf(0), 1.0);
        // No reuse at all.
        let rep = reuse_distance_cdf(&[1, 2, 3]);
        assert!(rep.distances.is_empty());
        assert_eq!(rep.cold, 3);
    }

    #[test]
    fn reuse_distance_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let len = rng.gen_range(1..60);
            let ids = rng.gen_range(1..10);
            let trace: Vec<u64> = (0..len).map(|_| rng.gen_range(0..ids)).collect();
            let fast = reuse_distance_cdf(&trace);
            let slow = reuse_distance_brute(&trace);
            assert_eq!(fast, slow, "trace {trace:?}");
        }
    }

    #[test]
    fn lru_identities() {
        // [A,A,B,A] with capacity 1: only the immediate reuse hits.
        let trace = [0u64, 0, 1, 0];
        assert_eq!(lru_hit_rate(&trace, 1), 0.25);
        assert_eq!(lru_hit_rate(&trace, 2), 0.5);
        assert_eq!(lru_simulate(&trace, 1), 0.25);
        // Large capacity: hit rate = re-access fraction.
        let trace = [0u64, 1, 2, 0, 1, 2];
        assert_eq!(lru_hit_rate(&trace, 100), 0.5);
        // Identity against full simulation on random traces.
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..20 {
            let trace: Vec<u64> = (0..200).map(|_| rng.gen_range(0..12)).collect();
            for cap in [1, 2, 4, 8] {
                assert_eq!(lru_hit_rate(&trace, cap), lru_simulate(&trace, cap));
            }
        }
    }

    #[test]
    fn lru_hit_rate_matches_cdf_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let trace: Vec<u64> = (0..500).map(|_| rng.gen_range(0..40)).collect();
        let rep = reuse_distance_cdf(&trace);
        let re_frac = rep.distances.len() as f64 / trace.len() as f64;
        for cap in [1u64, 2, 5, 10, 100] {
            let want = rep.cdf(cap - 1) * re_frac;
            assert!((lru_hit_rate(&trace, cap) - want).abs() < 1e-12);
        }
    }

    #[test]
    fn generator_determinism_and_bounds() {
        let a = gen_indices(16, 1000, Locality::Zipf(1.1), 3);
        let b = gen_indices(16, 1000, Locality::Zipf(1.1), 3);
        assert_eq!(a, b);
        assert!(a.iter().all(|i| *i < 16));
        let c = gen_indices(1, 10, Locality::Uniform, 3);
        assert!(c.iter().all(|i| *i == 0));
    }

    #[test]
    fn uniform_frequencies_within_three_sigma() {
        let rows = 16u64;
        let n = 10_000u64;
        let idx = gen_indices(rows, n, Locality::Uniform, 42);
        let mut freq = vec![0u64; rows as usize];
        for i in idx {
            freq[i as usize] += 1;
        }
        let mean = n as f64 / rows as f64;
        let sigma = (n as f64 * (1.0 / rows as f64) * (1.0 - 1.0 / rows as f64)).sqrt();
        for f in freq {
            assert!((f as f64 - mean).abs() < 3.5 * sigma, "freq {f} vs mean {mean}");
        }
    }

    #[test]
    fn zipf_skews_toward_hot_rows() {
        let rows = 64u64;
        let n = 20_000u64;
        let uni = gen_indices(rows, n, Locality::Uniform, 12);
        let zip = gen_indices(rows, n, Locality::Zipf(1.1), 12);
        let top = |v: &[u64]| {
            let mut f = vec![0u64; rows as usize];
            for i in v {
                f[*i as usize] += 1;
            }
            f.into_iter().max().unwrap()
        };
        assert!(top(&zip) > top(&uni));
    }
}
