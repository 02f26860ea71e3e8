use super::{Comm, RankGroup, RuntimeError, TAG_GATHER, TAG_HALO, TAG_SCHUR, TAG_SOLUTION};
use crate::decomp::{subtract_contributions, BbdStructure, RowPartition};
use crate::factor::{factorize, schur_partial_factor, FactorBundle, FactorKind, SchurFactor};
use crate::sparse::CsrMatrix;
use crate::{Error, Scalar};

/// A vector stored as one segment per owner.
///
/// For a row partition segment `r` holds rank `r`'s rows. For a bordered
/// block layout segment `b < nblocks` holds block `b` in permuted order and
/// the last segment holds the interface, owned by rank 0.
#[derive(Debug, Clone, PartialEq)]
pub struct DistVector<T> {
    pub segments: Vec<Vec<T>>,
}

impl<T: Scalar> DistVector<T> {
    pub fn scatter_rows(part: &RowPartition<T>, x: &[T]) -> Result<Self, RuntimeError> {
        if x.len() != part.dim() {
            return Err(RuntimeError::LayoutMismatch(format!(
                "vector of length {} for a partition of {} rows",
                x.len(),
                part.dim()
            )));
        }
        Ok(Self {
            segments: part.row_ranges.iter().map(|r| x[r.clone()].to_vec()).collect(),
        })
    }

    /// Concatenation of the segments.
    pub fn gather(&self) -> Vec<T> {
        self.segments.concat()
    }

    pub fn scatter_bbd(s: &BbdStructure<T>, x: &[T]) -> Result<Self, RuntimeError> {
        if x.len() != s.dim() {
            return Err(RuntimeError::LayoutMismatch(format!(
                "vector of length {} for a bordered layout of {} rows",
                x.len(),
                s.dim()
            )));
        }
        let permuted: Vec<T> = s.perm.iter().map(|&p| x[p]).collect();
        let mut segments: Vec<Vec<T>> = s.block_ranges.iter().map(|r| permuted[r.clone()].to_vec()).collect();
        segments.push(permuted[s.interface_range.clone()].to_vec());
        Ok(Self { segments })
    }

    /// Back to the original ordering.
    pub fn gather_bbd(&self, s: &BbdStructure<T>) -> Vec<T> {
        let permuted = self.gather();
        let mut x = vec![T::zero(); permuted.len()];
        for (new, &old) in s.perm.iter().enumerate() {
            x[old] = permuted[new];
        }
        x
    }
}

fn check_group(group: &RankGroup, expected: usize) -> Result<(), RuntimeError> {
    if group.nranks() != expected {
        return Err(RuntimeError::RankCountMismatch {
            expected,
            found: group.nranks(),
        });
    }
    Ok(())
}

fn check_segments<T>(x: &DistVector<T>, lens: impl Iterator<Item = usize>) -> Result<(), RuntimeError> {
    let lens: Vec<usize> = lens.collect();
    let got: Vec<usize> = x.segments.iter().map(Vec::len).collect();
    if got != lens {
        return Err(RuntimeError::LayoutMismatch(format!(
            "segment lengths {got:?}, expected {lens:?}"
        )));
    }
    Ok(())
}

/// `y = A x` with ghost values exchanged point to point. Each rank sends to a
/// neighbor only the entries that neighbor's ghost map lists, and rows
/// accumulate in ascending global column order exactly like the serial
/// product.
pub fn dist_spmv<T: Scalar>(
    group: &RankGroup,
    part: &RowPartition<T>,
    x: &DistVector<T>,
) -> Result<DistVector<T>, Error> {
    let n = part.nranks();
    check_group(group, n)?;
    check_segments(x, part.row_ranges.iter().map(|r| r.len()))?;
    // send_lists[r][q]: local indices on rank r that rank q needs
    let mut send_lists = vec![vec![Vec::new(); n]; n];
    for (q, map) in part.ghost_maps.iter().enumerate() {
        for &(owner, g) in map {
            send_lists[owner][q].push(g - part.row_ranges[owner].start);
        }
    }
    let segments = group.run(|c: &Comm<'_, T>| {
        let r = c.rank();
        let local = &x.segments[r];
        for (q, list) in send_lists[r].iter().enumerate() {
            if q != r && !list.is_empty() {
                c.send(q, TAG_HALO, list.iter().map(|&i| local[i]).collect())?;
            }
        }
        let map = &part.ghost_maps[r];
        let mut ghosts = vec![T::zero(); map.len()];
        let mut k = 0;
        while k < map.len() {
            let owner = map[k].0;
            let vals = c.recv(owner, TAG_HALO)?;
            for v in vals {
                ghosts[k] = v;
                k += 1;
            }
        }
        let range = &part.row_ranges[r];
        let diag = &part.diag_blocks[r];
        let off = &part.offdiag_blocks[r];
        let mut y = vec![T::zero(); range.len()];
        for (i, yi) in y.iter_mut().enumerate() {
            let (oc, ov) = off.row(i);
            let split = oc.partition_point(|&s| map[s].1 < range.start);
            let mut acc = T::zero();
            for (&s, &v) in oc[..split].iter().zip(&ov[..split]) {
                acc += v * ghosts[s];
            }
            let (dc, dv) = diag.row(i);
            for (&j, &v) in dc.iter().zip(dv) {
                acc += v * local[j];
            }
            for (&s, &v) in oc[split..].iter().zip(&ov[split..]) {
                acc += v * ghosts[s];
            }
            *yi = acc;
        }
        Ok(y)
    })?;
    Ok(DistVector { segments })
}

/// Block Jacobi application: every rank solves with its own diagonal-block
/// factors. No messages are exchanged.
pub fn bj_apply<T: Scalar>(
    group: &RankGroup,
    part: &RowPartition<T>,
    factors: &[FactorBundle<T>],
    r: &DistVector<T>,
) -> Result<DistVector<T>, Error> {
    let n = part.nranks();
    check_group(group, n)?;
    if factors.len() != n {
        return Err(RuntimeError::RankCountMismatch {
            expected: n,
            found: factors.len(),
        }
        .into());
    }
    check_segments(r, part.row_ranges.iter().map(|x| x.len()))?;
    let segments = group.run(|c: &Comm<'_, T>| {
        let k = c.rank();
        Ok(factors[k].sptrsv(&r.segments[k]).map_err(|e| e.in_block(k))?)
    })?;
    Ok(DistVector { segments })
}

/// Distributed Schur-complement factorization of a bordered block matrix.
#[derive(Debug, Clone)]
pub struct BbdFactors<T> {
    pub blocks: Vec<SchurFactor<T>>,
    /// Assembled interface Schur complement, held by rank 0.
    pub schur: CsrMatrix<T>,
    pub interface: FactorBundle<T>,
}

impl<T: Scalar> BbdFactors<T> {
    /// Entries of all L factors, interior blocks plus interface.
    pub fn nnz_l(&self) -> usize {
        self.blocks.iter().map(|b| b.interior.nnz_l()).sum::<usize>() + self.interface.nnz_l()
    }
}

fn empty_bundle<T: Scalar>(kind: FactorKind) -> FactorBundle<T> {
    FactorBundle {
        kind,
        l: CsrMatrix::zeros(0, 0),
        u: CsrMatrix::zeros(0, 0),
        row_perm: None,
        col_perm: None,
        row_scale: None,
        col_scale: None,
    }
}

fn dense_to_csr<T: Scalar>(n: usize, dense: &[T]) -> Result<CsrMatrix<T>, Error> {
    let trip = (0..n).flat_map(|i| (0..n).map(move |j| (i, j)));
    let trip = trip.filter_map(|(i, j)| {
        let v = dense[i * n + j];
        (v != T::zero()).then_some((i, j, v))
    });
    Ok(CsrMatrix::from_unsorted(n, n, trip)?)
}

/// Rank `b` factors block `b` and forms its Schur contribution; ranks other
/// than 0 send theirs to rank 0, which assembles and factors the interface
/// Schur complement. Sends exactly `nranks − 1` messages.
pub fn bbd_factor<T: Scalar>(group: &RankGroup, s: &BbdStructure<T>, kind: FactorKind) -> Result<BbdFactors<T>, Error> {
    let n = s.nblocks();
    check_group(group, n)?;
    let ns = s.interface_dim();
    let results = group.run(|c: &Comm<'_, T>| {
        let r = c.rank();
        let blk = &s.blocks[r];
        let sf = schur_partial_factor(&blk.diag, &blk.border_row, &blk.border_col, kind).map_err(|e| e.in_block(r))?;
        if r != 0 {
            c.send(0, TAG_SCHUR, sf.contrib_dense())?;
            return Ok((sf, None));
        }
        let mut contribs = vec![sf.schur_contrib.clone()];
        for src in 1..c.nranks() {
            let dense = c.recv(src, TAG_SCHUR)?;
            contribs.push(dense_to_csr(ns, &dense)?);
        }
        let refs: Vec<&CsrMatrix<T>> = contribs.iter().collect();
        let schur = subtract_contributions(&s.interface_block, &refs, s.interface_block.symmetry())?;
        let iface_kind = if kind.is_cholesky() && !schur.symmetry().is_symmetric() {
            match kind {
                FactorKind::Ic0 => FactorKind::Ilu0,
                _ => FactorKind::LuComplete,
            }
        } else {
            kind
        };
        let interface = if ns == 0 {
            empty_bundle(iface_kind)
        } else {
            factorize(&schur, iface_kind).map_err(|e| e.in_block(n))?
        };
        Ok((sf, Some((schur, interface))))
    })?;
    let mut blocks = Vec::with_capacity(n);
    let mut root = None;
    for (sf, extra) in results {
        blocks.push(sf);
        if extra.is_some() {
            root = extra;
        }
    }
    let (schur, interface) = root.expect("rank 0 returns the interface");
    Ok(BbdFactors {
        blocks,
        schur,
        interface,
    })
}

/// Applies the bordered block inverse: local forward solves, gather of the
/// border products at rank 0, interface solve, broadcast of the interface
/// solution, local backward solves. Sends exactly `2 (nranks − 1)` messages.
pub fn bbd_apply<T: Scalar>(
    group: &RankGroup,
    s: &BbdStructure<T>,
    f: &BbdFactors<T>,
    r: &DistVector<T>,
) -> Result<DistVector<T>, Error> {
    let n = s.nblocks();
    check_group(group, n)?;
    check_segments(
        r,
        s.block_ranges
            .iter()
            .map(|x| x.len())
            .chain(std::iter::once(s.interface_dim())),
    )?;
    let ns = s.interface_dim();
    let results = group.run(|c: &Comm<'_, T>| {
        let k = c.rank();
        let sf = &f.blocks[k];
        let rk = &r.segments[k];
        let z = sf.interior.sptrsv(rk).map_err(|e| e.in_block(k))?;
        let w = sf.border_row.spmv(&z)?;
        let xs = if k == 0 {
            let mut g = r.segments[n].clone();
            for (gi, wi) in g.iter_mut().zip(&w) {
                *gi -= *wi;
            }
            for src in 1..c.nranks() {
                let part = c.recv(src, TAG_GATHER)?;
                for (gi, wi) in g.iter_mut().zip(part) {
                    *gi -= wi;
                }
            }
            let xs = if ns == 0 {
                Vec::new()
            } else {
                f.interface.sptrsv(&g).map_err(|e| e.in_block(n))?
            };
            for dst in 1..c.nranks() {
                c.send(dst, TAG_SOLUTION, xs.clone())?;
            }
            xs
        } else {
            c.send(0, TAG_GATHER, w)?;
            c.recv(0, TAG_SOLUTION)?
        };
        let coupling = sf.border_col.spmv(&xs)?;
        let rhs: Vec<T> = rk.iter().zip(&coupling).map(|(&a, &b)| a - b).collect();
        let xk = sf.interior.sptrsv(&rhs).map_err(|e| e.in_block(k))?;
        Ok((xk, (k == 0).then_some(xs)))
    })?;
    let mut segments = Vec::with_capacity(n + 1);
    let mut iface = Vec::new();
    for (xk, xs) in results {
        segments.push(xk);
        if let Some(v) = xs {
            iface = v;
        }
    }
    segments.push(iface);
    Ok(DistVector { segments })
}
