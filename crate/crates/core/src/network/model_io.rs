//! Versioned little-endian model file with a trailing CRC32.
//!
//! Layout: magic, `u16` version, configuration, provenance, per-channel filter
//! banks, optional classifier, CRC32 of everything before it.

use std::fs;
use std::path::Path;

use super::{ChannelFilters, GraphConfig, GsPcaNetModel, NetConfig, NetError, Provenance, StageFilters};
use crate::classifier::SvmModel;
use crate::spca::GsPcaConfig;

pub const MAGIC: [u8; 4] = *b"GSPN";
pub const FORMAT_VERSION: u16 = 1;

struct Writer(Vec<u8>);

impl Writer {
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }

    fn u16(&mut self, v: u16) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }

    fn u32(&mut self, v: u32) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }

    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }

    fn usize(&mut self, v: usize) {
        self.u64(v as u64);
    }

    fn f64(&mut self, v: f64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }

    fn f64s(&mut self, vs: &[f64]) {
        self.u32(vs.len() as u32);
        vs.iter().for_each(|&v| self.f64(v));
    }

    fn solver(&mut self, c: &GsPcaConfig) {
        self.usize(c.q);
        self.f64(c.lambda);
        self.f64(c.lambda1);
        match &c.lambda1_per_component {
            Some(v) => {
                self.u8(1);
                self.f64s(v);
            }
            None => self.u8(0),
        }
        self.f64(c.rho);
        self.usize(c.max_iter);
        self.f64(c.tol);
        self.usize(c.inner_max_iter);
        self.f64(c.inner_tol);
    }

    fn bank(&mut self, s: &StageFilters) {
        self.u8(s.stage);
        self.u32(s.filters.len() as u32);
        self.u32(s.t1 as u32);
        self.u32(s.t2 as u32);
        for f in &s.filters {
            f.iter().for_each(|&v| self.f64(v));
        }
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], NetError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        let end = end.ok_or(NetError::Truncated { offset: self.buf.len() })?;
        let out = &self.buf[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N], NetError> {
        Ok(self.take(N)?.try_into().expect("slice length checked"))
    }

    fn u8(&mut self) -> Result<u8, NetError> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32, NetError> {
        Ok(u32::from_le_bytes(self.array()?))
    }

    fn u64(&mut self) -> Result<u64, NetError> {
        Ok(u64::from_le_bytes(self.array()?))
    }

    fn usize(&mut self) -> Result<usize, NetError> {
        usize::try_from(self.u64()?).map_err(|_| NetError::Corrupt("size field overflows".into()))
    }

    fn f64(&mut self) -> Result<f64, NetError> {
        Ok(f64::from_le_bytes(self.array()?))
    }

    fn flag(&mut self) -> Result<bool, NetError> {
        match self.u8()? {
            0 => Ok(false),
            1 => Ok(true),
            v => Err(NetError::Corrupt(format!("flag byte {v}"))),
        }
    }

    fn f64s(&mut self) -> Result<Vec<f64>, NetError> {
        let n = self.u32()? as usize;
        if n.saturating_mul(8) > self.buf.len() - self.pos {
            return Err(NetError::Truncated { offset: self.buf.len() });
        }
        (0..n).map(|_| self.f64()).collect()
    }

    fn solver(&mut self) -> Result<GsPcaConfig, NetError> {
        Ok(GsPcaConfig {
            q: self.usize()?,
            lambda: self.f64()?,
            lambda1: self.f64()?,
            lambda1_per_component: if self.flag()? { Some(self.f64s()?) } else { None },
            rho: self.f64()?,
            max_iter: self.usize()?,
            tol: self.f64()?,
            inner_max_iter: self.usize()?,
            inner_tol: self.f64()?,
        })
    }

    fn bank(&mut self) -> Result<StageFilters, NetError> {
        let stage = self.u8()?;
        let count = self.u32()? as usize;
        let t1 = self.u32()? as usize;
        let t2 = self.u32()? as usize;
        let len = t1
            .checked_mul(t2)
            .ok_or_else(|| NetError::Corrupt("filter size overflows".into()))?;
        if count.saturating_mul(len).saturating_mul(8) > self.buf.len() - self.pos {
            return Err(NetError::Truncated { offset: self.buf.len() });
        }
        let filters = (0..count)
            .map(|_| (0..len).map(|_| self.f64()).collect())
            .collect::<Result<_, _>>()?;
        Ok(StageFilters { stage, t1, t2, filters })
    }
}

pub fn encode_model(model: &GsPcaNetModel) -> Vec<u8> {
    let mut w = Writer(Vec::with_capacity(4096));
    w.0.extend_from_slice(&MAGIC);
    w.u16(FORMAT_VERSION);

    let c = &model.config;
    for v in [c.patch, c.l1, c.l2, c.block, c.stride, c.tile] {
        w.usize(v);
    }
    w.f64(c.theta_pos);
    w.solver(&c.stage1);
    w.solver(&c.stage2);
    w.usize(c.graph.k);
    w.usize(c.graph.max_nodes);
    w.usize(c.graph.pool);
    w.u8(c.graph.per_class as u8);

    let p = &model.provenance;
    w.u64(p.seed);
    w.0.extend_from_slice(&p.dataset_digest);
    match p.tuned_lambda1 {
        Some(l) => {
            w.u8(1);
            w.f64(l);
        }
        None => w.u8(0),
    }

    w.u32(model.channels.len() as u32);
    for ch in &model.channels {
        w.bank(&ch.stage1);
        w.bank(&ch.stage2);
    }

    match &model.classifier {
        Some(svm) => {
            w.u8(1);
            w.f64s(&svm.weights);
            w.f64(svm.bias);
            w.f64(svm.c);
            w.f64(svm.class_weights.0);
            w.f64(svm.class_weights.1);
            w.f64(svm.bias_scale);
            w.usize(svm.iterations);
        }
        None => w.u8(0),
    }

    let crc = crc32fast::hash(&w.0);
    w.u32(crc);
    w.0
}

pub fn decode_model(bytes: &[u8]) -> Result<GsPcaNetModel, NetError> {
    if bytes.len() < MAGIC.len() || bytes[..4] != MAGIC {
        return Err(NetError::BadMagic);
    }
    if bytes.len() < 6 {
        return Err(NetError::Truncated { offset: bytes.len() });
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != FORMAT_VERSION {
        return Err(NetError::UnsupportedVersion {
            found: version,
            supported: FORMAT_VERSION,
        });
    }
    if bytes.len() < 10 {
        return Err(NetError::Truncated { offset: bytes.len() });
    }
    let (body, tail) = bytes.split_at(bytes.len() - 4);
    let stored = u32::from_le_bytes(tail.try_into().expect("four bytes"));
    let computed = crc32fast::hash(body);
    if stored != computed {
        return Err(NetError::Checksum { stored, computed });
    }

    let mut r = Reader { buf: body, pos: 6 };
    let mut dims = [0usize; 6];
    for d in &mut dims {
        *d = r.usize()?;
    }
    let [patch, l1, l2, block, stride, tile] = dims;
    let theta_pos = r.f64()?;
    let stage1 = r.solver()?;
    let stage2 = r.solver()?;
    let graph = GraphConfig {
        k: r.usize()?,
        max_nodes: r.usize()?,
        pool: r.usize()?,
        per_class: r.flag()?,
    };
    let config = NetConfig {
        patch,
        l1,
        l2,
        block,
        stride,
        tile,
        theta_pos,
        stage1,
        stage2,
        graph,
    };
    config.validate().map_err(|e| NetError::Corrupt(e.to_string()))?;

    let seed = r.u64()?;
    let dataset_digest = r.array::<32>()?;
    let tuned_lambda1 = if r.flag()? { Some(r.f64()?) } else { None };

    let n_channels = r.u32()? as usize;
    let mut channels = Vec::new();
    for _ in 0..n_channels {
        let ch = ChannelFilters {
            stage1: r.bank()?,
            stage2: r.bank()?,
        };
        super::check_geometry(&config, &ch).map_err(|e| NetError::Corrupt(e.to_string()))?;
        channels.push(ch);
    }

    let classifier = if r.flag()? {
        let weights = r.f64s()?;
        let bias = r.f64()?;
        let c = r.f64()?;
        let class_weights = (r.f64()?, r.f64()?);
        let bias_scale = r.f64()?;
        let iterations = r.usize()?;
        let expected = config.feature_len(n_channels, tile, tile);
        if weights.len() != expected {
            return Err(NetError::Corrupt(format!(
                "classifier has {} weights, configuration implies {expected}",
                weights.len()
            )));
        }
        Some(SvmModel {
            weights,
            bias,
            c,
            class_weights,
            bias_scale,
            iterations,
        })
    } else {
        None
    };

    if r.pos != body.len() {
        return Err(NetError::Corrupt(format!("{} trailing bytes", body.len() - r.pos)));
    }
    Ok(GsPcaNetModel {
        config,
        channels,
        classifier,
        provenance: Provenance {
            seed,
            dataset_digest,
            tuned_lambda1,
        },
    })
}

pub fn save_model(model: &GsPcaNetModel, path: &Path) -> Result<(), NetError> {
    fs::write(path, encode_model(model)).map_err(|source| NetError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load_model(path: &Path) -> Result<GsPcaNetModel, NetError> {
    let bytes = fs::read(path).map_err(|source| NetError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    decode_model(&bytes)
}
