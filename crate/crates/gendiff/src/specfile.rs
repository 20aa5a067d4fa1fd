//! The `gendiff-spec v1` text format: a line-oriented description of a
//! diffusion that pipes between subcommands.
//!
//! A file starts with the header `gendiff-spec v1`; every further
//! non-comment line is one directive. Directives may appear in any order,
//! except that `sample` lines must follow `scale sampled`. `#` starts a
//! comment; blank lines are ignored. Numbers use Rust float syntax, with
//! `inf` and `-inf` for infinite endpoints. Only catalog formulas and the
//! cantor construction serialize; a spec holding an opaque closure has no
//! file form and [`emit`] refuses it.

use std::fmt::Write;

use crate::characteristics::{
    Atom, BoundaryBehavior, DiffusionSpec, Formula, Interval, ScalarField, ScaleFunction,
    SpeedCoords, SpeedMeasure,
};
use crate::characteristics::field::fmt_f64;
use crate::error::{Error, Result};
use crate::gallery::{cantor_q, fat_cantor_set};

pub const HEADER: &str = "gendiff-spec v1";

/// Parses a spec file. Errors carry the 1-based line and column of the
/// offending token; structural problems beyond syntax are left to
/// [`DiffusionSpec::validate`].
pub fn parse(text: &str) -> Result<DiffusionSpec> {
    let mut parser = Parser::default();
    let mut saw_header = false;
    let mut last_line = 0;
    for (idx, raw) in text.lines().enumerate() {
        let number = idx + 1;
        last_line = number;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        if !saw_header {
            if trimmed != HEADER {
                return Err(fail(number, 1, format!("expected header `{HEADER}`")));
            }
            saw_header = true;
            continue;
        }
        parser.directive(number, raw)?;
    }
    if !saw_header {
        return Err(fail(last_line.max(1), 1, format!("expected header `{HEADER}`")));
    }
    parser.finish(last_line)
}

/// Renders a spec in the v1 format so that [`parse`] reconstructs it.
pub fn emit(spec: &DiffusionSpec) -> Result<String> {
    if spec.label.is_empty() || spec.label.contains('\n') || spec.label.starts_with('#') {
        return Err(Error::Unsupported(format!(
            "label {:?} has no spec-file form",
            spec.label
        )));
    }
    let mut out = String::new();
    let _ = writeln!(out, "{HEADER}");
    let _ = writeln!(out, "label {}", spec.label);
    let _ = writeln!(
        out,
        "interval {} {} {} {}",
        fmt_f64(spec.interval.left),
        fmt_f64(spec.interval.right),
        openness(spec.interval.left_closed),
        openness(spec.interval.right_closed),
    );
    let _ = writeln!(out, "boundary left {}", behavior_text(&spec.left));
    let _ = writeln!(out, "boundary right {}", behavior_text(&spec.right));
    emit_scale(&mut out, &spec.scale)?;
    if spec.speed.coords == SpeedCoords::NaturalScale {
        let _ = writeln!(out, "speed coords natural");
    }
    let density = spec.speed.density.formula().ok_or_else(|| {
        Error::Unsupported("speed density is an opaque closure with no spec-file form".into())
    })?;
    let _ = writeln!(out, "speed density {}", density.tag());
    for atom in &spec.speed.atoms {
        let _ = writeln!(out, "speed atom {} {}", fmt_f64(atom.at), fmt_f64(atom.mass));
    }
    if let Some(x0) = spec.x0 {
        let _ = writeln!(out, "x0 {}", fmt_f64(x0));
    }
    Ok(out)
}

fn emit_scale(out: &mut String, scale: &ScaleFunction) -> Result<()> {
    match scale {
        ScaleFunction::Natural => {
            let _ = writeln!(out, "scale natural");
        }
        ScaleFunction::Density(d) => {
            let formula = d.sprime.formula().ok_or_else(|| {
                Error::Unsupported(
                    "scale density is an opaque closure with no spec-file form".into(),
                )
            })?;
            let _ = writeln!(
                out,
                "scale density {} anchor {} domain {} {}",
                formula.tag(),
                fmt_f64(d.anchor),
                fmt_f64(d.domain.0),
                fmt_f64(d.domain.1),
            );
        }
        ScaleFunction::InverseExplicit(ie) => {
            let directive = ie.spec_directive().ok_or_else(|| {
                Error::Unsupported(format!("scale {} has no spec-file form", ie.describe()))
            })?;
            let _ = writeln!(out, "scale {directive}");
        }
        ScaleFunction::Sampled(s) => {
            let _ = writeln!(out, "scale sampled");
            for (x, v) in s.grid.iter().zip(&s.values) {
                let _ = writeln!(out, "sample {} {}", fmt_f64(*x), fmt_f64(*v));
            }
        }
    }
    Ok(())
}

fn openness(closed: bool) -> &'static str {
    if closed {
        "closed"
    } else {
        "open"
    }
}

fn behavior_text(behavior: &BoundaryBehavior) -> String {
    match behavior {
        BoundaryBehavior::Inaccessible => "inaccessible".into(),
        BoundaryBehavior::Absorbing => "absorbing".into(),
        BoundaryBehavior::InstantReflecting => "reflecting".into(),
        BoundaryBehavior::SlowReflecting { mass } => {
            format!("slow-reflecting {}", fmt_f64(*mass))
        }
    }
}

fn fail(line: usize, column: usize, message: String) -> Error {
    Error::Parse { line, column, message }
}

/// Whitespace-separated tokens of a line with their 1-based columns.
fn tokens(line: &str) -> Vec<(usize, &str)> {
    let mut out = Vec::new();
    let mut start: Option<usize> = None;
    for (i, c) in line.char_indices() {
        if c.is_whitespace() {
            if let Some(s) = start.take() {
                out.push((s + 1, &line[s..i]));
            }
        } else if start.is_none() {
            start = Some(i);
        }
    }
    if let Some(s) = start {
        out.push((s + 1, &line[s..]));
    }
    out
}

#[derive(Default)]
struct Parser {
    label: Option<String>,
    interval: Option<Interval>,
    left: Option<BoundaryBehavior>,
    right: Option<BoundaryBehavior>,
    scale: Option<ScaleFunction>,
    /// Accumulates `sample` pairs after a `scale sampled` line.
    samples: Option<(Vec<f64>, Vec<f64>)>,
    density: Option<ScalarField>,
    coords: Option<SpeedCoords>,
    atoms: Vec<Atom>,
    x0: Option<f64>,
}

impl Parser {
    fn directive(&mut self, line: usize, raw: &str) -> Result<()> {
        let toks = tokens(raw);
        let (col0, word) = toks[0];
        match word {
            "label" => {
                self.no_duplicate(line, col0, "label", self.label.is_some())?;
                let rest = raw[col0 - 1 + word.len()..].trim();
                if rest.is_empty() {
                    return Err(fail(line, col0, "label must not be empty".into()));
                }
                self.label = Some(rest.to_string());
            }
            "interval" => {
                self.no_duplicate(line, col0, "interval", self.interval.is_some())?;
                let [_, lo, hi, lc, rc] =
                    fixed(line, raw, &toks, "interval <lo> <hi> <open|closed> <open|closed>")?;
                self.interval = Some(Interval {
                    left: number(line, lo)?,
                    right: number(line, hi)?,
                    left_closed: closedness(line, lc)?,
                    right_closed: closedness(line, rc)?,
                });
            }
            "boundary" => self.boundary(line, raw, &toks)?,
            "scale" => self.scale(line, raw, &toks)?,
            "sample" => {
                let Some((grid, values)) = self.samples.as_mut() else {
                    return Err(fail(
                        line,
                        col0,
                        "`sample` is only valid after `scale sampled`".into(),
                    ));
                };
                let [_, x, v] = fixed(line, raw, &toks, "sample <x> <s>")?;
                grid.push(number(line, x)?);
                values.push(number(line, v)?);
            }
            "speed" => self.speed(line, raw, &toks)?,
            "x0" => {
                self.no_duplicate(line, col0, "x0", self.x0.is_some())?;
                let [_, x] = fixed(line, raw, &toks, "x0 <x>")?;
                self.x0 = Some(number(line, x)?);
            }
            other => {
                return Err(fail(line, col0, format!("unknown directive `{other}`")));
            }
        }
        Ok(())
    }

    fn boundary(&mut self, line: usize, raw: &str, toks: &[(usize, &str)]) -> Result<()> {
        if toks.len() < 3 {
            return Err(fail(
                line,
                end_column(raw),
                "expected `boundary <left|right> <behavior>`".into(),
            ));
        }
        let behavior = match toks[2].1 {
            "inaccessible" => BoundaryBehavior::Inaccessible,
            "absorbing" => BoundaryBehavior::Absorbing,
            "reflecting" => BoundaryBehavior::InstantReflecting,
            "slow-reflecting" => {
                let [_, _, _, mass] =
                    fixed(line, raw, toks, "boundary <left|right> slow-reflecting <mass>")?;
                BoundaryBehavior::SlowReflecting { mass: number(line, mass)? }
            }
            other => {
                return Err(fail(
                    line,
                    toks[2].0,
                    format!(
                        "unknown boundary behavior `{other}`; expected inaccessible, \
                         absorbing, reflecting or slow-reflecting <mass>"
                    ),
                ));
            }
        };
        if !matches!(behavior, BoundaryBehavior::SlowReflecting { .. }) && toks.len() > 3 {
            return Err(fail(line, toks[3].0, format!("unexpected token `{}`", toks[3].1)));
        }
        let slot = match toks[1].1 {
            "left" => &mut self.left,
            "right" => &mut self.right,
            other => {
                return Err(fail(
                    line,
                    toks[1].0,
                    format!("expected `left` or `right`, got `{other}`"),
                ));
            }
        };
        if slot.is_some() {
            return Err(fail(
                line,
                toks[0].0,
                format!("duplicate `boundary {}` directive", toks[1].1),
            ));
        }
        *slot = Some(behavior);
        Ok(())
    }

    fn scale(&mut self, line: usize, raw: &str, toks: &[(usize, &str)]) -> Result<()> {
        let taken = self.scale.is_some() || self.samples.is_some();
        self.no_duplicate(line, toks[0].0, "scale", taken)?;
        if toks.len() < 2 {
            return Err(fail(
                line,
                end_column(raw),
                "expected `scale natural|density|sampled|cantor ...`".into(),
            ));
        }
        match toks[1].1 {
            "natural" => {
                only(line, toks, 2)?;
                self.scale = Some(ScaleFunction::Natural);
            }
            "density" => {
                let [_, _, tag, anchor_kw, anchor, domain_kw, lo, hi] = fixed(
                    line,
                    raw,
                    toks,
                    "scale density <formula> anchor <x> domain <lo> <hi>",
                )?;
                keyword(line, anchor_kw, "anchor")?;
                keyword(line, domain_kw, "domain")?;
                self.scale = Some(ScaleFunction::density(
                    ScalarField::Formula(formula(line, tag)?),
                    number(line, anchor)?,
                    (number(line, lo)?, number(line, hi)?),
                ));
            }
            "sampled" => {
                only(line, toks, 2)?;
                self.samples = Some((Vec::new(), Vec::new()));
            }
            "cantor" => {
                let [_, _, levels, alpha] = fixed(line, raw, toks, "scale cantor <levels> <alpha>")?;
                let levels_n: u32 = levels.1.parse().map_err(|_| {
                    fail(line, levels.0, format!("expected a level count, got `{}`", levels.1))
                })?;
                let set = fat_cantor_set(levels_n, number(line, alpha)?)
                    .map_err(|e| fail(line, toks[2].0, e.to_string()))?;
                self.scale = Some(cantor_q(&set));
            }
            other => {
                return Err(fail(
                    line,
                    toks[1].0,
                    format!(
                        "unknown scale kind `{other}`; expected natural, density, sampled or \
                         cantor"
                    ),
                ));
            }
        }
        Ok(())
    }

    fn speed(&mut self, line: usize, raw: &str, toks: &[(usize, &str)]) -> Result<()> {
        if toks.len() < 2 {
            return Err(fail(
                line,
                end_column(raw),
                "expected `speed density|coords|atom ...`".into(),
            ));
        }
        match toks[1].1 {
            "density" => {
                self.no_duplicate(line, toks[0].0, "speed density", self.density.is_some())?;
                let [_, _, tag] = fixed(line, raw, toks, "speed density <formula>")?;
                self.density = Some(ScalarField::Formula(formula(line, tag)?));
            }
            "coords" => {
                self.no_duplicate(line, toks[0].0, "speed coords", self.coords.is_some())?;
                let [_, _, which] = fixed(line, raw, toks, "speed coords <state|natural>")?;
                self.coords = Some(match which.1 {
                    "state" => SpeedCoords::StateSpace,
                    "natural" => SpeedCoords::NaturalScale,
                    other => {
                        return Err(fail(
                            line,
                            which.0,
                            format!("expected `state` or `natural`, got `{other}`"),
                        ));
                    }
                });
            }
            "atom" => {
                let [_, _, at, mass] = fixed(line, raw, toks, "speed atom <at> <mass>")?;
                self.atoms.push(Atom { at: number(line, at)?, mass: number(line, mass)? });
            }
            other => {
                return Err(fail(
                    line,
                    toks[1].0,
                    format!("unknown speed directive `{other}`; expected density, coords or atom"),
                ));
            }
        }
        Ok(())
    }

    fn no_duplicate(&self, line: usize, column: usize, name: &str, taken: bool) -> Result<()> {
        if taken {
            return Err(fail(line, column, format!("duplicate `{name}` directive")));
        }
        Ok(())
    }

    fn finish(mut self, last_line: usize) -> Result<DiffusionSpec> {
        if let Some((grid, values)) = self.samples.take() {
            if grid.len() < 2 {
                return Err(fail(
                    last_line,
                    1,
                    "`scale sampled` needs at least two `sample` lines".into(),
                ));
            }
            self.scale = Some(ScaleFunction::sampled(grid, values));
        }
        let missing = |name: &str| fail(last_line, 1, format!("missing `{name}` directive"));
        Ok(DiffusionSpec {
            label: self.label.ok_or_else(|| missing("label"))?,
            interval: self.interval.ok_or_else(|| missing("interval"))?,
            scale: self.scale.ok_or_else(|| missing("scale"))?,
            speed: SpeedMeasure {
                density: self.density.ok_or_else(|| missing("speed density"))?,
                atoms: self.atoms,
                coords: self.coords.unwrap_or(SpeedCoords::StateSpace),
            },
            left: self.left.ok_or_else(|| missing("boundary left"))?,
            right: self.right.ok_or_else(|| missing("boundary right"))?,
            x0: self.x0,
        })
    }
}

/// Demands an exact token count, returning the tokens as an array; the
/// usage string names the directive shape in the error.
fn fixed<'a, const N: usize>(
    line: usize,
    raw: &str,
    toks: &[(usize, &'a str)],
    usage: &str,
) -> Result<[(usize, &'a str); N]> {
    if toks.len() < N {
        return Err(fail(line, end_column(raw), format!("expected `{usage}`")));
    }
    if toks.len() > N {
        return Err(fail(line, toks[N].0, format!("unexpected token `{}`", toks[N].1)));
    }
    let mut out = [(0, ""); N];
    out.copy_from_slice(toks);
    Ok(out)
}

fn only(line: usize, toks: &[(usize, &str)], n: usize) -> Result<()> {
    if toks.len() > n {
        return Err(fail(line, toks[n].0, format!("unexpected token `{}`", toks[n].1)));
    }
    Ok(())
}

fn end_column(raw: &str) -> usize {
    raw.trim_end().len() + 1
}

fn number(line: usize, tok: (usize, &str)) -> Result<f64> {
    let v: f64 = tok
        .1
        .parse()
        .map_err(|_| fail(line, tok.0, format!("expected a number, got `{}`", tok.1)))?;
    if v.is_nan() {
        return Err(fail(line, tok.0, "NaN is not a valid value".into()));
    }
    Ok(v)
}

fn closedness(line: usize, tok: (usize, &str)) -> Result<bool> {
    match tok.1 {
        "open" => Ok(false),
        "closed" => Ok(true),
        other => Err(fail(line, tok.0, format!("expected `open` or `closed`, got `{other}`"))),
    }
}

fn formula(line: usize, tok: (usize, &str)) -> Result<Formula> {
    Formula::parse(tok.1).ok_or_else(|| {
        fail(
            line,
            tok.0,
            format!(
                "unknown formula `{}`; catalog: const(c), exp-quad(c), power(c,e), linear(c)",
                tok.1
            ),
        )
    })
}

fn keyword(line: usize, tok: (usize, &str), expected: &str) -> Result<()> {
    if tok.1 != expected {
        return Err(fail(line, tok.0, format!("expected `{expected}`, got `{}`", tok.1)));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gallery::{
        bm_spec, cantor_diffusion_spec, feller_mckean_spec, ou_spec, sticky_bm_spec,
    };

    fn round_trip(spec: &DiffusionSpec) -> DiffusionSpec {
        let text = emit(spec).unwrap();
        let back = parse(&text).unwrap();
        assert_eq!(emit(&back).unwrap(), text, "emission is not a fixed point");
        back
    }

    #[test]
    fn gallery_specs_round_trip() {
        let set = fat_cantor_set(6, 1.0).unwrap();
        let specs = [
            bm_spec(0.0),
            ou_spec(0.5),
            sticky_bm_spec(2.5, 0.0).unwrap(),
            feller_mckean_spec(50, 7, 0.0),
            cantor_diffusion_spec(&set, 0.5).unwrap(),
        ];
        for spec in &specs {
            let back = round_trip(spec);
            assert_eq!(back.label, spec.label);
            assert_eq!(back.interval, spec.interval);
            assert_eq!(back.speed.atoms, spec.speed.atoms);
            assert_eq!(back.x0, spec.x0);
            let report = back.validate();
            assert!(report.is_valid(), "{}: {:?}", back.label, report.violations);
        }
    }

    #[test]
    fn round_trip_preserves_scale_values() {
        let ou = round_trip(&ou_spec(0.0));
        for x in [-1.0, 0.3, 1.7] {
            let a = ou_spec(0.0).scale.eval(x).unwrap();
            let b = ou.scale.eval(x).unwrap();
            assert_eq!(a, b, "x = {x}");
        }
        let set = fat_cantor_set(8, 0.5).unwrap();
        let cantor = round_trip(&cantor_diffusion_spec(&set, 0.5).unwrap());
        let orig = cantor_diffusion_spec(&set, 0.5).unwrap();
        for w in [0.1, 0.375, 0.9] {
            match (&cantor.scale, &orig.scale) {
                (ScaleFunction::InverseExplicit(a), ScaleFunction::InverseExplicit(b)) => {
                    assert_eq!(a.value(w), b.value(w), "w = {w}");
                }
                _ => panic!("cantor scale lost its explicit inverse"),
            }
        }
    }

    #[test]
    fn sampled_scale_and_sticky_walls_round_trip() {
        let spec = DiffusionSpec {
            label: "ramp".into(),
            interval: Interval::closed(0.0, 2.0),
            scale: ScaleFunction::sampled(vec![0.0, 1.0, 2.0], vec![0.0, 0.5, 2.0]),
            speed: SpeedMeasure::lebesgue(),
            left: BoundaryBehavior::SlowReflecting { mass: 2.5 },
            right: BoundaryBehavior::InstantReflecting,
            x0: Some(1.0),
        };
        let back = round_trip(&spec);
        assert_eq!(back.left, BoundaryBehavior::SlowReflecting { mass: 2.5 });
        assert_eq!(back.scale.eval(1.5).unwrap(), 1.25);
    }

    #[test]
    fn comments_and_blank_lines_are_ignored() {
        let text = "\
# leading comment

gendiff-spec v1
label bm
# the whole line
interval -inf inf open open
boundary left inaccessible
boundary right inaccessible
scale natural
speed density const(1)
";
        let spec = parse(text).unwrap();
        assert_eq!(spec.label, "bm");
        assert_eq!(spec.x0, None);
        assert_eq!(spec.speed.coords, SpeedCoords::StateSpace);
    }

    fn parse_error(text: &str) -> (usize, usize, String) {
        match parse(text) {
            Err(Error::Parse { line, column, message }) => (line, column, message),
            other => panic!("expected a parse error, got {other:?}"),
        }
    }

    #[test]
    fn errors_carry_line_and_column() {
        let (line, column, message) = parse_error("not a header\n");
        assert_eq!((line, column), (1, 1));
        assert!(message.contains("gendiff-spec v1"));

        let (line, column, _) = parse_error("gendiff-spec v1\nwobble 3\n");
        assert_eq!((line, column), (2, 1));

        let (line, column, message) =
            parse_error("gendiff-spec v1\nlabel x\ninterval 0 one open open\n");
        assert_eq!((line, column), (3, 12));
        assert!(message.contains("one"));

        let (line, column, _) = parse_error("gendiff-spec v1\nx0 1\nx0 2\n");
        assert_eq!((line, column), (3, 1));

        let (_, column, message) = parse_error("gendiff-spec v1\nsample 0 0\n");
        assert_eq!(column, 1);
        assert!(message.contains("scale sampled"));

        let (line, _, message) = parse_error(
            "gendiff-spec v1\nlabel x\ninterval 0 1 open open\nboundary left inaccessible\n\
             boundary right inaccessible\nscale natural\n",
        );
        assert_eq!(line, 6);
        assert!(message.contains("speed density"));
    }

    #[test]
    fn trailing_tokens_and_bad_values_rejected() {
        let (_, column, _) = parse_error("gendiff-spec v1\nscale natural oops\n");
        assert_eq!(column, 15);
        let (_, _, message) = parse_error("gendiff-spec v1\nx0 NaN\n");
        assert!(message.contains("NaN"));
        let (_, _, message) = parse_error("gendiff-spec v1\nspeed density wiggle(1)\n");
        assert!(message.contains("catalog"));
        let (_, _, message) = parse_error("gendiff-spec v1\nscale cantor 0 1\n");
        assert!(message.contains("positive"));
    }

    #[test]
    fn closure_fields_have_no_file_form() {
        let mut spec = bm_spec(0.0);
        spec.speed = SpeedMeasure::with_density(ScalarField::from_fn(|x| 1.0 + x * x));
        assert!(matches!(emit(&spec), Err(Error::Unsupported(_))));
    }
}
