//! Two-level inclusive LRU cache model for access-side loads. A request's
//! hint picks the first level probed (L2 or LLC) and whether it allocates
//! (temporal) or bypasses allocation entirely (non-temporal, which also
//! leaves replacement state untouched).

use crate::slc::{CacheLevel, LoadHint};
use serde::Serialize;
use std::collections::BTreeMap;

#[derive(Debug, Clone)]
pub struct CacheModelConfig {
    /// Line size in elements (one element = one scalar lane).
    pub line_elems: u64,
    pub l2_lines: usize,
    pub llc_lines: usize,
}

impl Default for CacheModelConfig {
    fn default() -> Self {
        CacheModelConfig {
            line_elems: 16,
            l2_lines: 64,
            llc_lines: 512,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct LevelStats {
    pub hits: u64,
    pub misses: u64,
    /// Per-memref (hits, misses).
    pub per_memref: BTreeMap<String, (u64, u64)>,
}

impl LevelStats {
    fn record(&mut self, mem: &str, hit: bool) {
        let entry = self.per_memref.entry(mem.to_string()).or_default();
        if hit {
            self.hits += 1;
            entry.0 += 1;
        } else {
            self.misses += 1;
            entry.1 += 1;
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct CacheStats {
    pub l2: LevelStats,
    pub llc: LevelStats,
    /// Elements loaded through the model.
    pub elements_loaded: u64,
    /// Accesses that reached the level below L2 (LLC probes).
    pub downstream_accesses: u64,
    /// Downstream accesses per kilo element loaded.
    pub apke: f64,
}

/// An LRU stack of line ids: a probe hits iff the line's stack distance is
/// below the capacity.
#[derive(Debug, Clone, Default)]
struct LruStack {
    cap: usize,
    lines: Vec<u64>,
}

impl LruStack {
    fn new(cap: usize) -> LruStack {
        LruStack {
            cap,
            lines: Vec::new(),
        }
    }

    fn probe(&mut self, line: u64, update: bool) -> bool {
        let pos = self.lines.iter().position(|l| *l == line);
        let hit = pos.map(|p| p < self.cap).unwrap_or(false);
        if update {
            if let Some(p) = pos {
                self.lines.remove(p);
            }
            self.lines.insert(0, line);
            self.lines.truncate(self.cap);
        }
        hit
    }

    /// Snapshot of resident lines, most recent first.
    fn contents(&self) -> Vec<u64> {
        self.lines.clone()
    }
}

#[derive(Debug)]
pub struct CacheSim {
    cfg: CacheModelConfig,
    l2: LruStack,
    llc: LruStack,
    /// Element-granular base address per memref, line-aligned.
    bases: BTreeMap<String, u64>,
    next_base: u64,
    pub stats: CacheStats,
}

impl CacheSim {
    pub fn new(cfg: CacheModelConfig) -> CacheSim {
        CacheSim {
            l2: LruStack::new(cfg.l2_lines),
            llc: LruStack::new(cfg.llc_lines),
            cfg,
            bases: BTreeMap::new(),
            next_base: 0,
            stats: CacheStats::default(),
        }
    }

    fn base_of(&mut self, mem: &str, len: u64) -> u64 {
        if let Some(b) = self.bases.get(mem) {
            return *b;
        }
        let b = self.next_base;
        let lines = len.div_ceil(self.cfg.line_elems).max(1);
        self.next_base += lines * self.cfg.line_elems;
        self.bases.insert(mem.to_string(), b);
        b
    }

    /// One load request covering `offsets` (flat element positions within
    /// `mem`, whose total length is `mem_len`). Each distinct line probes
    /// the hierarchy once.
    pub fn load(&mut self, mem: &str, mem_len: u64, offsets: &[u64], hint: Option<LoadHint>) {
        let base = self.base_of(mem, mem_len);
        let first = hint.map(|h| h.cache_level).unwrap_or(CacheLevel::Llc);
        let temporal = hint.map(|h| h.temporal).unwrap_or(true);
        self.stats.elements_loaded += offsets.len() as u64;
        let mut lines: Vec<u64> = offsets
            .iter()
            .map(|o| (base + o) / self.cfg.line_elems)
            .collect();
        lines.sort_unstable();
        lines.dedup();
        for line in lines {
            match first {
                CacheLevel::L1 | CacheLevel::L2 => {
                    // Probe L2 first; only misses travel downstream.
                    let hit = self.l2.probe(line, temporal);
                    self.stats.l2.record(mem, hit);
                    if !hit {
                        self.stats.downstream_accesses += 1;
                        let llc_hit = self.llc.probe(line, temporal);
                        self.stats.llc.record(mem, llc_hit);
                    }
                }
                CacheLevel::Llc => {
                    // Route straight to the last-level cache.
                    self.stats.downstream_accesses += 1;
                    let hit = self.llc.probe(line, temporal);
                    self.stats.llc.record(mem, hit);
                }
            }
        }
        self.recompute_apke();
    }

    fn recompute_apke(&mut self) {
        if self.stats.elements_loaded > 0 {
            self.stats.apke =
                self.stats.downstream_accesses as f64 * 1000.0 / self.stats.elements_loaded as f64;
        }
    }

    /// Resident L2 lines, for occupancy comparisons in tests.
    pub fn l2_contents(&self) -> Vec<u64> {
        self.l2.contents()
    }
}
