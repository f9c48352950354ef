//! Potential pairs (V₁, V₂) and the named presets.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PotentialShape {
    Free,
    /// amplitude · exp(−(x/width)²)
    GaussianBump { amplitude: f64, width: f64 },
    /// height · [exp(−((x−a)/w)²) + exp(−((x+a)/w)²)]
    DoubleBarrier { separation: f64, height: f64, width: f64 },
    /// coefficient · x²; not decaying, used for closed-form flow checks.
    Quadratic { coefficient: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DampingShape {
    None,
    Constant { value: f64 },
    /// amplitude · exp(−(x/width)²)
    WellCentered { amplitude: f64, width: f64 },
    /// Smooth compact bump on inner_radius ≤ |x| ≤ inner_radius + width.
    OutsideOnly { amplitude: f64, inner_radius: f64, width: f64 },
}

fn gauss(u: f64) -> f64 {
    (-u * u).exp()
}

/// exp(1 − 1/(1−u²)) on |u| < 1, zero outside; peak value 1 at u = 0.
pub fn smooth_bump(u: f64) -> f64 {
    if u.abs() >= 1.0 {
        0.0
    } else {
        (1.0 - 1.0 / (1.0 - u * u)).exp()
    }
}

impl PotentialShape {
    pub fn value(&self, x: f64) -> f64 {
        match *self {
            PotentialShape::Free => 0.0,
            PotentialShape::GaussianBump { amplitude, width } => amplitude * gauss(x / width),
            PotentialShape::DoubleBarrier { separation: a, height, width: w } => {
                height * (gauss((x - a) / w) + gauss((x + a) / w))
            }
            PotentialShape::Quadratic { coefficient } => coefficient * x * x,
        }
    }

    pub fn gradient(&self, x: f64) -> f64 {
        match *self {
            PotentialShape::Free => 0.0,
            PotentialShape::GaussianBump { amplitude, width } => {
                -2.0 * x / (width * width) * amplitude * gauss(x / width)
            }
            PotentialShape::DoubleBarrier { separation: a, height, width: w } => {
                let (u, v) = ((x - a) / w, (x + a) / w);
                -2.0 * height / w * (u * gauss(u) + v * gauss(v))
            }
            PotentialShape::Quadratic { coefficient } => 2.0 * coefficient * x,
        }
    }

    pub fn is_decaying(&self) -> bool {
        !matches!(self, PotentialShape::Quadratic { .. })
    }
}

impl DampingShape {
    pub fn value(&self, x: f64) -> f64 {
        match *self {
            DampingShape::None => 0.0,
            DampingShape::Constant { value } => value,
            DampingShape::WellCentered { amplitude, width } => amplitude * gauss(x / width),
            DampingShape::OutsideOnly { amplitude, inner_radius, width } => {
                let c = inner_radius + 0.5 * width;
                amplitude * smooth_bump((x.abs() - c) / (0.5 * width))
            }
        }
    }
}

/// The pair (V₁, V₂) with its decay exponent and a display label.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Potential {
    pub shape: PotentialShape,
    pub damping: DampingShape,
    pub rho: f64,
    pub preset_name: String,
}

impl Potential {
    pub fn new(shape: PotentialShape, damping: DampingShape) -> Self {
        let preset_name = format!("{}+{}", shape_label(&shape), damping_label(&damping));
        Potential { shape, damping, rho: 1.0, preset_name }
    }

    pub fn free() -> Self {
        Self::new(PotentialShape::Free, DampingShape::None)
    }

    pub fn with_damping(mut self, damping: DampingShape) -> Self {
        self.preset_name = format!("{}+{}", shape_label(&self.shape), damping_label(&damping));
        self.damping = damping;
        self
    }

    pub fn v1(&self, x: f64) -> f64 {
        self.shape.value(x)
    }

    pub fn grad_v1(&self, x: f64) -> f64 {
        self.shape.gradient(x)
    }

    pub fn v2(&self, x: f64) -> f64 {
        self.damping.value(x)
    }

    /// Sampled checks of the type invariants on |x| ≤ radius.
    pub fn check_invariants(&self, radius: f64, samples: usize) -> Result<()> {
        let step = 2.0 * radius / (samples.max(2) - 1) as f64;
        let mut decay_c = 0.0f64;
        for k in 0..samples.max(2) {
            let x = -radius + k as f64 * step;
            let v2 = self.v2(x);
            if !(v2 >= 0.0) {
                return Err(Error::precondition(format!("V2({x}) must be nonnegative"), v2));
            }
            let d = 1e-5;
            let fd = (self.v1(x + d) - self.v1(x - d)) / (2.0 * d);
            let g = self.grad_v1(x);
            let scale = g.abs().max(self.v1(x).abs()).max(1e-3);
            if (fd - g).abs() > 1e-6 * scale {
                return Err(Error::precondition(format!("grad V1 mismatch at x = {x}"), fd - g));
            }
            if self.shape.is_decaying() {
                let jap = (1.0 + x * x).sqrt();
                if x.abs() <= 1.0 {
                    decay_c = decay_c.max(self.v1(x).abs() * jap.powf(self.rho));
                } else if self.v1(x).abs() * jap.powf(self.rho) > decay_c.max(1.0) * 1e3 {
                    return Err(Error::precondition(format!("V1 does not decay at x = {x}"), self.v1(x)));
                }
            }
        }
        Ok(())
    }
}

fn shape_label(s: &PotentialShape) -> String {
    match s {
        PotentialShape::Free => "free".into(),
        PotentialShape::GaussianBump { amplitude, width } => format!("gaussian_bump({amplitude},{width})"),
        PotentialShape::DoubleBarrier { separation, height, width } => {
            format!("double_barrier({separation},{height},{width})")
        }
        PotentialShape::Quadratic { coefficient } => format!("quadratic({coefficient})"),
    }
}

fn damping_label(d: &DampingShape) -> String {
    match d {
        DampingShape::None => "none".into(),
        DampingShape::Constant { value } => format!("constant({value})"),
        DampingShape::WellCentered { amplitude, width } => format!("well_centered({amplitude},{width})"),
        DampingShape::OutsideOnly { amplitude, inner_radius, width } => {
            format!("outside_only({amplitude},{inner_radius},{width})")
        }
    }
}

/// Splits `name(a,b,...)` into the name and its numeric arguments.
fn split_call(spec: &str, key: &str) -> Result<(String, Vec<f64>)> {
    let spec = spec.trim();
    match spec.find('(') {
        None => Ok((spec.to_string(), vec![])),
        Some(open) => {
            if !spec.ends_with(')') {
                return Err(Error::config(key, format!("unbalanced parentheses in `{spec}`")));
            }
            let name = spec[..open].trim().to_string();
            let inner = &spec[open + 1..spec.len() - 1];
            let args = inner
                .split(',')
                .filter(|s| !s.trim().is_empty())
                .map(|s| {
                    s.trim()
                        .parse::<f64>()
                        .map_err(|_| Error::config(key, format!("`{}` is not a number", s.trim())))
                })
                .collect::<Result<Vec<_>>>()?;
            Ok((name, args))
        }
    }
}

fn with_defaults<const N: usize>(args: &[f64], defaults: [f64; N], key: &str, name: &str) -> Result<[f64; N]> {
    if args.len() > N {
        return Err(Error::config(key, format!("`{name}` takes at most {N} arguments")));
    }
    let mut out = defaults;
    out[..args.len()].copy_from_slice(args);
    Ok(out)
}

pub const POTENTIAL_PRESETS: &[(&str, &str)] = &[
    ("free", "V1 = 0"),
    ("gaussian_bump(A,w)", "V1 = A exp(-(x/w)^2); defaults A=1, w=1"),
    ("double_barrier(a,B,w)", "V1 = B[exp(-((x-a)/w)^2) + exp(-((x+a)/w)^2)]; defaults a=2, B=2, w=0.25"),
    ("quadratic(c)", "V1 = c x^2 (not decaying); default c=1"),
];

pub const DAMPING_PRESETS: &[(&str, &str)] = &[
    ("none", "V2 = 0"),
    ("constant(c)", "V2 = c; default c=0.5"),
    ("well_centered(A,w)", "V2 = A exp(-(x/w)^2); defaults A=1, w=0.75"),
    ("outside_only(A,r,w)", "smooth bump of height A on r <= |x| <= r+w; defaults A=1, r=4, w=2"),
];

pub fn parse_potential(spec: &str, key: &str) -> Result<PotentialShape> {
    let (name, args) = split_call(spec, key)?;
    let shape = match name.as_str() {
        "free" => {
            with_defaults::<0>(&args, [], key, &name)?;
            PotentialShape::Free
        }
        "gaussian_bump" => {
            let [amplitude, width] = with_defaults(&args, [1.0, 1.0], key, &name)?;
            PotentialShape::GaussianBump { amplitude, width }
        }
        "double_barrier" => {
            let [separation, height, width] = with_defaults(&args, [2.0, 2.0, 0.25], key, &name)?;
            PotentialShape::DoubleBarrier { separation, height, width }
        }
        "quadratic" => {
            let [coefficient] = with_defaults(&args, [1.0], key, &name)?;
            PotentialShape::Quadratic { coefficient }
        }
        other => return Err(Error::config(key, format!("unknown potential preset `{other}`"))),
    };
    match &shape {
        PotentialShape::GaussianBump { width, .. } | PotentialShape::DoubleBarrier { width, .. } if *width <= 0.0 => {
            Err(Error::config(key, "width must be positive"))
        }
        _ => Ok(shape),
    }
}

pub fn parse_damping(spec: &str, key: &str) -> Result<DampingShape> {
    let (name, args) = split_call(spec, key)?;
    let d = match name.as_str() {
        "none" => {
            with_defaults::<0>(&args, [], key, &name)?;
            DampingShape::None
        }
        "constant" => {
            let [value] = with_defaults(&args, [0.5], key, &name)?;
            DampingShape::Constant { value }
        }
        "well_centered" => {
            let [amplitude, width] = with_defaults(&args, [1.0, 0.75], key, &name)?;
            DampingShape::WellCentered { amplitude, width }
        }
        "outside_only" => {
            let [amplitude, inner_radius, width] = with_defaults(&args, [1.0, 4.0, 2.0], key, &name)?;
            DampingShape::OutsideOnly { amplitude, inner_radius, width }
        }
        other => return Err(Error::config(key, format!("unknown damping preset `{other}`"))),
    };
    let amp = match d {
        DampingShape::Constant { value } => value,
        DampingShape::WellCentered { amplitude, .. } | DampingShape::OutsideOnly { amplitude, .. } => amplitude,
        DampingShape::None => 0.0,
    };
    if amp < 0.0 {
        return Err(Error::config(key, "damping must be nonnegative"));
    }
    Ok(d)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_parse_with_defaults() {
        assert_eq!(parse_potential("free", "k").unwrap(), PotentialShape::Free);
        assert_eq!(
            parse_potential("double_barrier(2, 2)", "k").unwrap(),
            PotentialShape::DoubleBarrier { separation: 2.0, height: 2.0, width: 0.25 }
        );
        assert_eq!(parse_damping("constant(0.3)", "k").unwrap(), DampingShape::Constant { value: 0.3 });
    }

    #[test]
    fn unknown_preset_names_the_key() {
        let e = parse_potential("triple_barrier", "scenario.potential").unwrap_err();
        assert!(e.to_string().contains("scenario.potential"));
    }

    #[test]
    fn gradients_match_finite_differences() {
        for spec in ["gaussian_bump(-1,1)", "double_barrier", "quadratic(2)"] {
            let p = Potential::new(parse_potential(spec, "k").unwrap(), DampingShape::None);
            p.check_invariants(6.0, 301).unwrap();
        }
    }

    #[test]
    fn outside_bump_support() {
        let d = parse_damping("outside_only", "k").unwrap();
        assert_eq!(d.value(3.9), 0.0);
        assert_eq!(d.value(0.0), 0.0);
        assert!((d.value(5.0) - 1.0).abs() < 1e-15);
        assert!((d.value(-5.0) - 1.0).abs() < 1e-15);
        assert_eq!(d.value(6.1), 0.0);
    }
}
