use std::fmt::Write as _;
use std::io::Read;
use std::path::Path;

use super::IpmError;
use crate::sparse::CsrMatrix;
use crate::Scalar;

/// `min cᵀx  s.t.  B x = b,  x ≥ 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct LpProblem<T> {
    b_mat: CsrMatrix<T>,
    b: Vec<T>,
    c: Vec<T>,
}

impl<T: Scalar> LpProblem<T> {
    /// Checks `m ≤ n`, vector lengths, and full structural row rank of `B`.
    pub fn new(b_mat: CsrMatrix<T>, b: Vec<T>, c: Vec<T>) -> Result<Self, IpmError> {
        let (m, n) = (b_mat.nrows(), b_mat.ncols());
        if m > n {
            return Err(IpmError::Dimensions(format!("{m} constraints exceed {n} variables")));
        }
        if b.len() != m {
            return Err(IpmError::Dimensions(format!("b has length {}, expected {m}", b.len())));
        }
        if c.len() != n {
            return Err(IpmError::Dimensions(format!("c has length {}, expected {n}", c.len())));
        }
        if !b.iter().chain(&c).all(|v| v.is_finite()) || !b_mat.values().iter().all(|v| v.is_finite()) {
            return Err(IpmError::Dimensions("non-finite problem data".into()));
        }
        let rank = structural_rank(&b_mat);
        if rank < m {
            return Err(IpmError::RankDeficient { rank, m });
        }
        Ok(Self { b_mat, b, c })
    }

    pub fn constraints(&self) -> &CsrMatrix<T> {
        &self.b_mat
    }

    pub fn rhs(&self) -> &[T] {
        &self.b
    }

    pub fn cost(&self) -> &[T] {
        &self.c
    }

    /// Number of constraints.
    pub fn m(&self) -> usize {
        self.b_mat.nrows()
    }

    /// Number of variables.
    pub fn n(&self) -> usize {
        self.b_mat.ncols()
    }

    pub fn objective(&self, x: &[T]) -> T {
        crate::sparse::vector::dot(&self.c, x)
    }
}

/// Size of a maximum matching between rows and columns of the pattern.
pub fn structural_rank<T: Scalar>(a: &CsrMatrix<T>) -> usize {
    let mut col_match = vec![usize::MAX; a.ncols()];
    let mut visited = vec![usize::MAX; a.ncols()];
    let mut rank = 0;
    for i in 0..a.nrows() {
        if augment(a, i, i, &mut col_match, &mut visited) {
            rank += 1;
        }
    }
    rank
}

fn augment<T: Scalar>(
    a: &CsrMatrix<T>,
    row: usize,
    stamp: usize,
    col_match: &mut [usize],
    visited: &mut [usize],
) -> bool {
    // explicit stack of (row, next position in its column list)
    let mut stack: Vec<(usize, usize)> = vec![(row, 0)];
    let mut path: Vec<usize> = Vec::new();
    while let Some(&mut (r, ref mut pos)) = stack.last_mut() {
        let cols = a.row(r).0;
        if *pos >= cols.len() {
            stack.pop();
            path.pop();
            continue;
        }
        let j = cols[*pos];
        *pos += 1;
        if visited[j] == stamp {
            continue;
        }
        visited[j] = stamp;
        path.push(j);
        if col_match[j] == usize::MAX {
            // flip the path
            for (k, &(r, _)) in stack.iter().enumerate() {
                col_match[path[k]] = r;
            }
            return true;
        }
        stack.push((col_match[j], 0));
    }
    false
}

fn parse_err(line: usize, msg: impl Into<String>) -> IpmError {
    IpmError::Parse { line, msg: msg.into() }
}

fn parse_num<T: Scalar>(tok: &str, line: usize) -> Result<T, IpmError> {
    tok.parse::<f64>()
        .map(T::of)
        .map_err(|_| parse_err(line, format!("expected a number, found `{tok}`")))
}

/// Reads the line-oriented LP format:
///
/// ```text
/// # comment
/// n m
/// c_0 c_1 ... c_{n-1}
/// b_i k j_1:v_1 ... j_k:v_k      (m lines, column indices 0-based)
/// ```
pub fn parse_lp<T: Scalar, R: Read>(mut reader: R) -> Result<LpProblem<T>, IpmError> {
    let mut text = String::new();
    reader.read_to_string(&mut text)?;
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(k, l)| (k + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty());
    let (hl, header) = lines.next().ok_or_else(|| parse_err(1, "missing `n m` header"))?;
    let dims: Vec<&str> = header.split_whitespace().collect();
    if dims.len() != 2 {
        return Err(parse_err(hl, "header must be `n m`"));
    }
    let n: usize = dims[0].parse().map_err(|_| parse_err(hl, "bad variable count"))?;
    let m: usize = dims[1].parse().map_err(|_| parse_err(hl, "bad constraint count"))?;
    let (cl, cline) = lines.next().ok_or_else(|| parse_err(hl + 1, "missing cost line"))?;
    let c: Vec<T> = cline
        .split_whitespace()
        .map(|t| parse_num(t, cl))
        .collect::<Result<_, _>>()?;
    if c.len() != n {
        return Err(parse_err(cl, format!("cost line has {} values, expected {n}", c.len())));
    }
    let mut b = Vec::with_capacity(m);
    let mut trip = Vec::new();
    for i in 0..m {
        let (ln, row) = lines
            .next()
            .ok_or_else(|| parse_err(cl, format!("expected {m} constraint lines, found {i}")))?;
        let mut toks = row.split_whitespace();
        let bi = parse_num(toks.next().expect("line is nonempty"), ln)?;
        let k: usize = toks
            .next()
            .ok_or_else(|| parse_err(ln, "missing entry count"))?
            .parse()
            .map_err(|_| parse_err(ln, "bad entry count"))?;
        let entries: Vec<&str> = toks.collect();
        if entries.len() != k {
            return Err(parse_err(ln, format!("declared {k} entries, found {}", entries.len())));
        }
        let mut seen = Vec::with_capacity(k);
        for e in entries {
            let (j, v) = e
                .split_once(':')
                .ok_or_else(|| parse_err(ln, format!("entry `{e}` is not idx:val")))?;
            let j: usize = j
                .parse()
                .map_err(|_| parse_err(ln, format!("bad column index `{j}`")))?;
            if j >= n {
                return Err(parse_err(ln, format!("column {j} out of range for {n} variables")));
            }
            if seen.contains(&j) {
                return Err(parse_err(ln, format!("column {j} repeated")));
            }
            seen.push(j);
            trip.push((i, j, parse_num(v, ln)?));
        }
        b.push(bi);
    }
    if let Some((ln, _)) = lines.next() {
        return Err(parse_err(ln, "trailing content after the last constraint"));
    }
    let b_mat = CsrMatrix::from_unsorted(m, n, trip).map_err(|e| parse_err(hl, e.to_string()))?;
    LpProblem::new(b_mat, b, c)
}

pub fn read_lp<T: Scalar, P: AsRef<Path>>(path: P) -> Result<LpProblem<T>, IpmError> {
    parse_lp(std::fs::File::open(path)?)
}

/// Writes the format read by [`parse_lp`], values in shortest round-trip form.
pub fn format_lp<T: Scalar>(p: &LpProblem<T>) -> String {
    let mut s = format!("{} {}\n", p.n(), p.m());
    let c: Vec<String> = p.c.iter().map(|v| format!("{:?}", v.as_f64())).collect();
    s.push_str(&c.join(" "));
    s.push('\n');
    for i in 0..p.m() {
        let (cols, vals) = p.b_mat.row(i);
        write!(s, "{:?} {}", p.b[i].as_f64(), cols.len()).expect("write to string");
        for (j, v) in cols.iter().zip(vals) {
            write!(s, " {j}:{:?}", v.as_f64()).expect("write to string");
        }
        s.push('\n');
    }
    s
}
