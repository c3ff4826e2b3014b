//! SDPA sparse format (".dat-s") export/import and solution-file parsing.
//!
//! The on-disk problem is the SDPA minimization
//!
//! ```text
//! min (c_sdpa) . x   s.t.  sum_k x_k Fk - F0_sdpa  PSD
//! ```
//!
//! and an instance `maximize c.u, F0 + sum u_k Fk PSD` maps onto it with
//! `x = u`, `c_sdpa = -c`, `F0_sdpa = -F0`, the same `Fk`. Exports are
//! byte-stable: entries are sorted, and floats print with 17 significant
//! digits so that parse followed by export reproduces the file exactly.

use nalgebra::{DMatrix, DVector};

use super::elim::reduce;
use super::{AffineBlock, Residuals, SdpError, SdpInstance, SdpSolution, SolveStatus};

/// How linear equalities are represented in the exported file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EqualityEncoding {
    /// Each row `a.u = b` becomes two opposing 1x1 entries of a trailing
    /// diagonal block (`a.u - b >= 0` and `b - a.u >= 0`).
    #[default]
    PairedDiagonal,
    /// Equalities are eliminated by nullspace substitution first; the file
    /// contains the reduced inequality-only program and notes the constant
    /// objective offset in a comment.
    Eliminated,
}

fn fmt_f(v: f64) -> String {
    format!("{v:.16e}")
}

/// Serialize an instance to SDPA sparse format.
pub fn export_sdpa(instance: &SdpInstance, encoding: EqualityEncoding) -> Result<String, SdpError> {
    match encoding {
        EqualityEncoding::PairedDiagonal => {
            if instance.num_equalities() == 0 {
                return Ok(write_plain(instance, None));
            }
            let (eq_a, eq_b) = instance.equalities();
            let r = eq_a.nrows();
            let mut eq_block = AffineBlock::diagonal(2 * r);
            for t in 0..r {
                eq_block.set_f0(2 * t, 2 * t, -eq_b[t]);
                eq_block.set_f0(2 * t + 1, 2 * t + 1, eq_b[t]);
                for k in 0..instance.num_vars() {
                    let a = eq_a[(t, k)];
                    if a != 0.0 {
                        eq_block.push_term(k, 2 * t, 2 * t, a);
                        eq_block.push_term(k, 2 * t + 1, 2 * t + 1, -a);
                    }
                }
            }
            eq_block.normalize();
            let mut blocks = instance.blocks().to_vec();
            blocks.push(eq_block);
            let plain = SdpInstance::new(instance.objective().to_vec(), blocks)?;
            Ok(write_plain(&plain, None))
        }
        EqualityEncoding::Eliminated => {
            let red = reduce(instance)?;
            let mut blocks = Vec::with_capacity(red.c_blocks.len());
            for (bi, c) in red.c_blocks.iter().enumerate() {
                let side = c.nrows();
                let mut blk = AffineBlock::new(side);
                for i in 0..side {
                    for j in i..side {
                        blk.set_f0(i, j, c[(i, j)]);
                    }
                }
                for (j, f) in red.a_blocks[bi].iter().enumerate() {
                    for r in 0..side {
                        for cc in r..side {
                            blk.push_term(j, r, cc, f[(r, cc)]);
                        }
                    }
                }
                blk.normalize();
                blocks.push(blk);
            }
            let obj: Vec<f64> = red.obj.iter().copied().collect();
            let reduced = SdpInstance::new(obj, blocks)?;
            Ok(write_plain(&reduced, Some(red.offset)))
        }
    }
}

fn write_plain(instance: &SdpInstance, offset: Option<f64>) -> String {
    let m = instance.num_vars();
    let mut out = String::new();
    out.push_str("*SDPA sparse export\n");
    out.push_str("*problem: maximize c.u with F0 + sum_k u_k Fk PSD\n");
    out.push_str(
        "*encoding: min (-c).x s.t. sum_k x_k Fk - (-F0) PSD; x identical to u; signs of c and F0 flipped below\n",
    );
    if let Some(off) = offset {
        out.push_str(&format!(
            "*objective offset (add to the recovered maximum): {}\n",
            fmt_f(off)
        ));
    }
    out.push_str(&format!("{m}\n"));
    out.push_str(&format!("{}\n", instance.blocks().len()));
    let sizes: Vec<String> = instance
        .blocks()
        .iter()
        .map(|b| {
            if b.is_diagonal() {
                format!("-{}", b.side())
            } else {
                format!("{}", b.side())
            }
        })
        .collect();
    out.push_str(&sizes.join(" "));
    out.push('\n');
    let cs: Vec<String> = instance.objective().iter().map(|&c| fmt_f(-c)).collect();
    out.push_str(&cs.join(" "));
    out.push('\n');

    // (matno, blkno, i, j, value), 1-based, sorted for stable output
    let mut entries: Vec<(usize, usize, usize, usize, f64)> = Vec::new();
    for (bi, block) in instance.blocks().iter().enumerate() {
        let f0 = block.f0();
        for i in 0..block.side() {
            for j in i..block.side() {
                let v = -f0[(i, j)];
                if v != 0.0 {
                    entries.push((0, bi + 1, i + 1, j + 1, v));
                }
            }
        }
        for &(var, r, c, x) in block.terms() {
            entries.push((var as usize + 1, bi + 1, r as usize + 1, c as usize + 1, x));
        }
    }
    entries.sort_by(|a, b| (a.0, a.1, a.2, a.3).cmp(&(b.0, b.1, b.2, b.3)));
    for (k, b, i, j, v) in entries {
        out.push_str(&format!("{k} {b} {i} {j} {}\n", fmt_f(v)));
    }
    out
}

fn parse_err(line: usize, message: impl Into<String>) -> SdpError {
    SdpError::Parse {
        line,
        message: message.into(),
    }
}

struct TokenCursor<'a> {
    tokens: Vec<(usize, &'a str)>,
    pos: usize,
    eof_line: usize,
}

impl<'a> TokenCursor<'a> {
    fn new(text: &'a str) -> Self {
        let mut tokens = Vec::new();
        for (ln, line) in text.lines().enumerate() {
            let trimmed = line.trim();
            if trimmed.starts_with('*') || trimmed.starts_with('"') {
                continue;
            }
            for tok in trimmed
                .split(|c: char| c.is_whitespace() || matches!(c, ',' | '{' | '}' | '(' | ')'))
                .filter(|t| !t.is_empty())
            {
                tokens.push((ln + 1, tok));
            }
        }
        TokenCursor {
            tokens,
            pos: 0,
            eof_line: text.lines().count(),
        }
    }

    fn next(&mut self, what: &str) -> Result<(usize, &'a str), SdpError> {
        let &(ln, tok) = self
            .tokens
            .get(self.pos)
            .ok_or_else(|| parse_err(self.eof_line, format!("unexpected end of file, expected {what}")))?;
        self.pos += 1;
        Ok((ln, tok))
    }

    fn next_int(&mut self, what: &str) -> Result<(usize, i64), SdpError> {
        let (ln, tok) = self.next(what)?;
        tok.parse::<i64>()
            .map(|v| (ln, v))
            .map_err(|_| parse_err(ln, format!("expected integer {what}, got '{tok}'")))
    }

    fn next_f64(&mut self, what: &str) -> Result<(usize, f64), SdpError> {
        let (ln, tok) = self.next(what)?;
        tok.parse::<f64>()
            .map(|v| (ln, v))
            .map_err(|_| parse_err(ln, format!("expected {what}, got '{tok}'")))
    }

    fn exhausted(&self) -> bool {
        self.pos >= self.tokens.len()
    }
}

/// Parse an SDPA sparse problem file back into an instance (user
/// maximization convention).
pub fn parse_sdpa(text: &str) -> Result<SdpInstance, SdpError> {
    let mut cur = TokenCursor::new(text);
    let (_, m) = cur.next_int("variable count")?;
    let (ln_m, nblocks) = cur.next_int("block count")?;
    if m < 0 || nblocks <= 0 {
        return Err(parse_err(ln_m, "variable/block counts must be positive"));
    }
    let m = m as usize;
    let nblocks = nblocks as usize;

    let mut sides = Vec::with_capacity(nblocks);
    for _ in 0..nblocks {
        let (ln, s) = cur.next_int("block size")?;
        if s == 0 {
            return Err(parse_err(ln, "zero block size"));
        }
        sides.push(s);
    }

    let mut objective = Vec::with_capacity(m);
    for _ in 0..m {
        let (_, v) = cur.next_f64("objective value")?;
        objective.push(-v);
    }

    let mut blocks: Vec<AffineBlock> = sides
        .iter()
        .map(|&s| {
            if s < 0 {
                AffineBlock::diagonal((-s) as usize)
            } else {
                AffineBlock::new(s as usize)
            }
        })
        .collect();

    while !cur.exhausted() {
        let (ln, matno) = cur.next_int("entry matrix number")?;
        let (_, blkno) = cur.next_int("entry block number")?;
        let (_, i) = cur.next_int("entry row")?;
        let (_, j) = cur.next_int("entry column")?;
        let (_, v) = cur.next_f64("entry value")?;
        if blkno < 1 || blkno as usize > nblocks {
            return Err(parse_err(ln, format!("block number {blkno} out of range")));
        }
        let block = &mut blocks[blkno as usize - 1];
        if i < 1 || j < 1 || i as usize > block.side() || j as usize > block.side() {
            return Err(parse_err(ln, format!("entry index ({i},{j}) out of range")));
        }
        let (r, c) = (i as usize - 1, j as usize - 1);
        if matno == 0 {
            block.set_f0(r, c, -v);
        } else if matno as usize <= m {
            block.push_term(matno as usize - 1, r, c, v);
        } else {
            return Err(parse_err(ln, format!("matrix number {matno} out of range")));
        }
    }
    for b in &mut blocks {
        b.normalize();
    }
    SdpInstance::new(objective, blocks)
}

/// Parse an external solver's output file: `objValPrimal`, `objValDual`,
/// `xVec` (and optionally `phase.value`). Objective signs are mapped back
/// from the SDPA minimization to the maximization convention; residuals are
/// taken on trust from the external report and zeroed.
pub fn import_solution(text: &str) -> Result<SdpSolution, SdpError> {
    let mut obj_primal: Option<f64> = None;
    let mut obj_dual: Option<f64> = None;
    let mut phase: Option<String> = None;
    let mut xvec: Option<Vec<f64>> = None;

    let lines: Vec<&str> = text.lines().collect();
    let mut i = 0usize;
    while i < lines.len() {
        let line = lines[i].trim();
        if let Some(rest) = line.strip_prefix("objValPrimal") {
            obj_primal = Some(parse_kv_number(rest, i + 1)?);
        } else if let Some(rest) = line.strip_prefix("objValDual") {
            obj_dual = Some(parse_kv_number(rest, i + 1)?);
        } else if let Some(rest) = line.strip_prefix("phase.value") {
            phase = Some(rest.trim_start_matches([' ', '=']).trim().to_string());
        } else if line.starts_with("xVec") {
            let mut body = line
                .splitn(2, '=')
                .nth(1)
                .unwrap_or("")
                .trim()
                .to_string();
            while !body.contains('}') {
                i += 1;
                if i >= lines.len() {
                    return Err(parse_err(lines.len(), "unterminated xVec block"));
                }
                body.push(' ');
                body.push_str(lines[i].trim());
            }
            let inner = body
                .trim()
                .trim_start_matches('{')
                .split('}')
                .next()
                .unwrap_or("");
            let mut vals = Vec::new();
            for tok in inner.split(',').map(str::trim).filter(|t| !t.is_empty()) {
                let v: f64 = tok
                    .parse()
                    .map_err(|_| parse_err(i + 1, format!("bad xVec value '{tok}'")))?;
                vals.push(v);
            }
            xvec = Some(vals);
        }
        i += 1;
    }

    let primal = obj_primal.ok_or_else(|| parse_err(lines.len(), "missing objValPrimal"))?;
    let dual = obj_dual.ok_or_else(|| parse_err(lines.len(), "missing objValDual"))?;
    let u = xvec.ok_or_else(|| parse_err(lines.len(), "missing xVec"))?;
    let status = match phase.as_deref() {
        Some("pdOPT") => SolveStatus::Optimal,
        Some(p) if p.contains("pINF") => SolveStatus::PrimalInfeasible,
        Some(p) if p.contains("dINF") => SolveStatus::DualInfeasible,
        Some(_) => SolveStatus::Inaccurate,
        None => SolveStatus::Inaccurate,
    };
    Ok(SdpSolution {
        u,
        primal_obj: -primal,
        dual_obj: -dual,
        status,
        residuals: Residuals {
            primal_feas: 0.0,
            dual_feas: 0.0,
            rel_gap: 0.0,
        },
        iterations: 0,
    })
}

fn parse_kv_number(rest: &str, line: usize) -> Result<f64, SdpError> {
    let v = rest.trim_start_matches([' ', '=']).trim();
    v.parse()
        .map_err(|_| parse_err(line, format!("expected a number, got '{v}'")))
}

/// Convenience used by tests/CLI fixtures: instance for
/// `maximize u1 s.t. [[1, u1], [u1, 1]] PSD`.
#[cfg(test)]
pub(crate) fn tiny_correlation_instance() -> SdpInstance {
    let mut block = AffineBlock::new(2);
    block.set_f0(0, 0, 1.0);
    block.set_f0(1, 1, 1.0);
    block.push_term(0, 0, 1, 1.0);
    block.normalize();
    SdpInstance::new(vec![1.0], vec![block]).expect("valid tiny instance")
}

#[cfg(test)]
pub(crate) fn instance_with_eq_for_tests() -> SdpInstance {
    // maximize u0 s.t. [u0] PSD, [3 - u0] PSD, u0 + u1 = 2, u1 free via 1x1 bound
    let mut b1 = AffineBlock::new(1);
    b1.push_term(0, 0, 0, 1.0);
    b1.normalize();
    let mut b2 = AffineBlock::new(1);
    b2.set_f0(0, 0, 3.0);
    b2.push_term(0, 0, 0, -1.0);
    b2.normalize();
    let mut b3 = AffineBlock::new(1);
    b3.set_f0(0, 0, 10.0);
    b3.push_term(1, 0, 0, 1.0);
    b3.normalize();
    let eq_a = DMatrix::from_row_slice(1, 2, &[1.0, 1.0]);
    let eq_b = DVector::from_column_slice(&[2.0]);
    SdpInstance::with_equalities(vec![1.0, 0.0], vec![b1, b2, b3], eq_a, eq_b)
        .expect("valid instance")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn export_mentions_single_constraint_block() {
        let inst = tiny_correlation_instance();
        let text = export_sdpa(&inst, EqualityEncoding::PairedDiagonal).unwrap();
        let data_lines: Vec<&str> = text
            .lines()
            .filter(|l| !l.starts_with('*') && !l.starts_with('"'))
            .collect();
        assert_eq!(data_lines[0], "1");
        assert_eq!(data_lines[1], "1");
        assert_eq!(data_lines[2], "2");
    }

    #[test]
    fn export_parse_round_trip_is_byte_identical() {
        let inst = tiny_correlation_instance();
        let text = export_sdpa(&inst, EqualityEncoding::PairedDiagonal).unwrap();
        let parsed = parse_sdpa(&text).unwrap();
        let text2 = export_sdpa(&parsed, EqualityEncoding::PairedDiagonal).unwrap();
        assert_eq!(text, text2);

        // paired equalities survive the file-level round trip too
        let with_eq = instance_with_eq_for_tests();
        let t1 = export_sdpa(&with_eq, EqualityEncoding::PairedDiagonal).unwrap();
        let t2 = export_sdpa(&parse_sdpa(&t1).unwrap(), EqualityEncoding::PairedDiagonal).unwrap();
        assert_eq!(t1, t2);
    }

    #[test]
    fn parse_reports_line_numbers() {
        let err = parse_sdpa("1\n1\n2\nnot_a_number\n").unwrap_err();
        match err {
            SdpError::Parse { line, .. } => assert_eq!(line, 4),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn solution_import_parses_objectives_and_vector() {
        let text = "phase.value  = pdOPT\n objValPrimal = -1.25e+00\nobjValDual   = -1.26e+00\nxVec = \n{+1.25e+00, 3.0}\n";
        let sol = import_solution(text).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert_eq!(sol.primal_obj, 1.25);
        assert_eq!(sol.dual_obj, 1.26);
        assert_eq!(sol.u, vec![1.25, 3.0]);
        assert!(import_solution("xVec=\n{1.0}\n").is_err());
    }
}
