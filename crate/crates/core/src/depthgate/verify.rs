//! Decoding MIP solutions back into a neuron and checking them exactly.

use super::bnb::{solve_mip_with, Checkpoint, MipError, MipSolution, SolverConfig};
use super::{
    conformity_ordered, eval_g, phi_ordered, Conformity, DepthgateError, MipModel, RaySet, Subset,
    VarKind,
};
use crate::linalg::{lp_max, solve_linear, LpResult, RatMatrix, RatVector, Rational, SolveResult};

/// A neuron `relu(sum_M a_M g_M)` read off a model solution.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecodedNeuron {
    pub rays: RaySet,
    pub coefficients: Vec<(Subset, Rational)>,
    /// Incoming activation per ray, in ray order.
    pub activations: Vec<Rational>,
    /// `max{0, activation}` per ray.
    pub outputs: Vec<Rational>,
    /// `phi` of the outputs, which equals the objective.
    pub phi: Rational,
}

struct Layout {
    rays: RaySet,
    inputs: Vec<(usize, Subset)>,
    z: Vec<usize>,
    y: Vec<usize>,
}

fn layout(model: &MipModel) -> Result<Layout, DepthgateError> {
    let mut inputs = Vec::new();
    let mut zs = Vec::new();
    let mut ys = Vec::new();
    for (j, v) in model.variables.iter().enumerate() {
        let bad = || DepthgateError::UnrecognizedColumn(v.name.clone());
        let (head, tail) = v
            .name
            .split_at(v.name.chars().next().map_or(0, char::len_utf8));
        let subset = Subset::parse_digits(tail)
            .filter(|s| !s.is_empty())
            .ok_or_else(bad)?;
        match (head, v.kind) {
            ("a", VarKind::Continuous) => inputs.push((j, subset)),
            ("z", VarKind::Binary) => zs.push((subset, j)),
            ("y", VarKind::Continuous) => ys.push((subset, j)),
            _ => return Err(bad()),
        }
    }
    let dim = zs
        .iter()
        .flat_map(|(s, _)| s.elements())
        .max()
        .ok_or(DepthgateError::UnrecognizedColumn("z".into()))?;
    let rays = RaySet::new(dim.max(1));
    let order = |cols: Vec<(Subset, usize)>| -> Result<Vec<usize>, DepthgateError> {
        let mut out = vec![None; rays.len()];
        for (s, j) in cols {
            let i = rays.index_of(s).ok_or(DepthgateError::UnknownSubset(s))?;
            out[i] = Some(j);
        }
        out.iter()
            .enumerate()
            .map(|(i, j)| j.ok_or(DepthgateError::MissingSubset(rays.subsets()[i])))
            .collect()
    };
    let z = order(zs)?;
    let y = order(ys)?;
    Ok(Layout { rays, inputs, z, y })
}

fn activations(rays: &RaySet, inputs: &[(Subset, Rational)]) -> Vec<Rational> {
    rays.rays()
        .iter()
        .map(|r| {
            let mut acc = Rational::zero();
            for (m, a) in inputs {
                acc.add_mul(a, &eval_g(*m, r));
            }
            acc
        })
        .collect()
}

/// Decodes `x` and checks it against the neuron semantics: outputs are the
/// exact ReLU of the activations, indicators agree with the activation
/// signs, activations stay within the number of coefficients in absolute
/// value, `relu` of the activation is H-conforming, and `phi` equals the
/// objective.
pub fn decode(model: &MipModel, x: &[Rational]) -> Result<DecodedNeuron, DepthgateError> {
    if x.len() != model.num_vars() {
        return Err(DepthgateError::SolutionLength {
            expected: model.num_vars(),
            found: x.len(),
        });
    }
    let lay = layout(model)?;
    let coefficients: Vec<(Subset, Rational)> =
        lay.inputs.iter().map(|&(j, m)| (m, x[j].clone())).collect();
    let acts = activations(&lay.rays, &coefficients);
    let limit = Rational::from_int(coefficients.len() as i64);
    let fail = |msg: String| Err(DepthgateError::Inconsistent(msg));
    let mut outputs = Vec::with_capacity(acts.len());
    for (i, act) in acts.iter().enumerate() {
        let s = lay.rays.subsets()[i];
        if act.abs() > limit {
            return fail(format!("activation {act} at ray {s} exceeds {limit}"));
        }
        let out = act.clone().max(Rational::zero());
        if x[lay.y[i]] != out {
            return fail(format!(
                "output at ray {s} is {} but relu gives {out}",
                x[lay.y[i]]
            ));
        }
        let z = &x[lay.z[i]];
        let sign_ok = if z.is_one() {
            !act.is_negative()
        } else {
            z.is_zero() && !act.is_positive()
        };
        if !sign_ok {
            return fail(format!(
                "indicator {z} at ray {s} contradicts activation {act}"
            ));
        }
        outputs.push(out);
    }
    if let Conformity::Violation { inner, outer } = conformity_ordered(&lay.rays, &acts) {
        return fail(format!(
            "activations at {inner} and {outer} have opposite signs"
        ));
    }
    let phi = phi_ordered(&lay.rays, &outputs);
    if phi != model.objective_value(x) {
        return fail(format!("phi {phi} differs from the objective"));
    }
    Ok(DecodedNeuron {
        rays: lay.rays,
        coefficients,
        activations: acts,
        outputs,
        phi,
    })
}

/// The model point for coefficients `a` (in model column order), with
/// `y = relu(activation)` and `z = 1` exactly where the activation is
/// positive. The point is feasible iff the activation pattern conforms.
pub fn solution_from_coefficients(
    model: &MipModel,
    a: &[Rational],
) -> Result<Vec<Rational>, DepthgateError> {
    let lay = layout(model)?;
    if a.len() != lay.inputs.len() {
        return Err(DepthgateError::SolutionLength {
            expected: lay.inputs.len(),
            found: a.len(),
        });
    }
    let coefficients: Vec<(Subset, Rational)> = lay
        .inputs
        .iter()
        .zip(a)
        .map(|(&(_, m), v)| (m, v.clone()))
        .collect();
    let acts = activations(&lay.rays, &coefficients);
    let mut x = vec![Rational::zero(); model.num_vars()];
    for (&(j, _), v) in lay.inputs.iter().zip(a) {
        x[j] = v.clone();
    }
    for (i, act) in acts.iter().enumerate() {
        x[lay.y[i]] = act.clone().max(Rational::zero());
        x[lay.z[i]] = Rational::from_int(i64::from(act.is_positive()));
    }
    Ok(x)
}

/// A point for the input-reflected neuron, scaled back into the box.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Reflected {
    pub solution: Vec<Rational>,
    /// `objective(solution) * scale == -objective(original)`.
    pub scale: Rational,
}

/// Composes the incoming function with `x -> -x`, which is what negating all
/// first-layer weights does. Since `r_S = -r_{S'}` for the complement `S'`,
/// the activations are permuted between complementary rays, and `phi` of the
/// outputs changes sign. The new coefficients are found by solving for them
/// in the same basis; if any leaves `[-1, 1]` all are divided by the largest
/// magnitude, recorded as `scale`.
pub fn reflect_solution(model: &MipModel, x: &[Rational]) -> Result<Reflected, DepthgateError> {
    if x.len() != model.num_vars() {
        return Err(DepthgateError::SolutionLength {
            expected: model.num_vars(),
            found: x.len(),
        });
    }
    let lay = layout(model)?;
    let coefficients: Vec<(Subset, Rational)> =
        lay.inputs.iter().map(|&(j, m)| (m, x[j].clone())).collect();
    let acts = activations(&lay.rays, &coefficients);
    let target: RatVector = lay
        .rays
        .subsets()
        .iter()
        .map(|&s| {
            acts[lay
                .rays
                .index_of(lay.rays.antipode(s))
                .expect("complement is a ray")]
            .clone()
        })
        .collect();
    let rows: Vec<Vec<Rational>> = lay
        .rays
        .rays()
        .iter()
        .map(|r| lay.inputs.iter().map(|&(_, m)| eval_g(m, r)).collect())
        .collect();
    let system = RatMatrix::from_rows(rows, lay.inputs.len()).map_err(MipError::from)?;
    let a = match solve_linear(&system, &target).map_err(MipError::from)? {
        SolveResult::Unique(a) => a.into_inner(),
        _ => {
            return Err(DepthgateError::Inconsistent(
                "reflected function leaves the span of the inputs".into(),
            ))
        }
    };
    let scale = a
        .iter()
        .map(Rational::abs)
        .fold(Rational::one(), Rational::max);
    let scaled: Vec<Rational> = a.iter().map(|v| v / &scale).collect();
    Ok(Reflected {
        solution: solution_from_coefficients(model, &scaled)?,
        scale,
    })
}

/// Optimum by enumerating every binary assignment and solving the remaining
/// LP exactly. `None` if no assignment is feasible. Intended for models with
/// few binaries.
pub fn brute_force_optimum(model: &MipModel) -> Result<Option<Rational>, MipError> {
    let binaries = model.binary_indices();
    assert!(binaries.len() <= 24, "too many binaries to enumerate");
    let mut lp = model.lp_relaxation()?;
    let mut best: Option<Rational> = None;
    for mask in 0u32..1 << binaries.len() {
        for (k, &j) in binaries.iter().enumerate() {
            let v = Rational::from_int(i64::from(mask >> k & 1));
            lp.bounds[j].lower = Some(v.clone());
            lp.bounds[j].upper = Some(v);
        }
        if let LpResult::Optimal { value, .. } = lp_max(&lp)? {
            best = Some(match best {
                Some(b) => b.max(value),
                None => value,
            });
        }
    }
    Ok(best)
}

/// Solves and decodes the incumbent, failing if it does not verify.
pub fn solve_and_verify(
    model: &MipModel,
    config: &SolverConfig,
    resume: Option<Checkpoint>,
) -> Result<(MipSolution, Option<DecodedNeuron>), DepthgateError> {
    let sol = solve_mip_with(model, config, resume)?;
    let decoded = match &sol.incumbent {
        Some(x) => {
            if !model.is_feasible(x) {
                return Err(DepthgateError::Inconsistent(
                    "incumbent is infeasible".into(),
                ));
            }
            Some(decode(model, x)?)
        }
        None => None,
    };
    if !sol.checkpoint.trace_is_monotone() {
        return Err(DepthgateError::Inconsistent(
            "bound trace is not monotone".into(),
        ));
    }
    Ok((sol, decoded))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::depthgate::{build_mip, build_mip_analog_2d, BasisTable};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_coefficients(rng: &mut ChaCha8Rng, k: usize) -> Vec<Rational> {
        (0..k)
            .map(|_| {
                if rng.gen_bool(0.4) {
                    Rational::zero()
                } else {
                    Rational::new(rng.gen_range(-4..=4), 4)
                }
            })
            .collect()
    }

    #[test]
    fn zero_solution_decodes() {
        let m = build_mip();
        let x = vec![Rational::zero(); m.num_vars()];
        let d = decode(&m, &x).unwrap();
        assert_eq!(d.phi, Rational::zero());
        assert_eq!(d.coefficients.len(), 14);
    }

    /// A single first-layer neuron `relu(x_i - x_j)` is conforming and lies
    /// in the span of the small basis, so its `phi` vanishes.
    #[test]
    fn single_hinge_is_feasible_with_zero_phi() {
        let m = build_mip();
        let table = BasisTable::new(4);
        let names: Vec<String> = table
            .small
            .iter()
            .map(|&k| format!("a{}", table.functions[k].digits()))
            .collect();
        for (hinge, base) in [("a12", "a2"), ("a03", "a3"), ("a01", "a1")] {
            let mut a = vec![Rational::zero(); 14];
            a[names.iter().position(|n| n == hinge).unwrap()] = Rational::one();
            a[names.iter().position(|n| n == base).unwrap()] = -Rational::one();
            let x = solution_from_coefficients(&m, &a).unwrap();
            assert!(m.is_feasible(&x));
            assert_eq!(decode(&m, &x).unwrap().phi, Rational::zero());
        }
    }

    #[test]
    fn reflection_negates_phi_on_random_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for model in [build_mip(), build_mip_analog_2d()] {
            let k = model
                .variables
                .iter()
                .filter(|v| v.name.starts_with('a'))
                .count();
            let mut feasible = 0;
            for _ in 0..300 {
                let a = random_coefficients(&mut rng, k);
                let x = solution_from_coefficients(&model, &a).unwrap();
                let r = reflect_solution(&model, &x).unwrap();
                assert_eq!(model.is_feasible(&x), model.is_feasible(&r.solution));
                let v = model.objective_value(&x);
                assert_eq!(model.objective_value(&r.solution) * &r.scale, -v.clone());
                if model.is_feasible(&x) {
                    feasible += 1;
                    assert_eq!(decode(&model, &x).unwrap().phi, v);
                }
            }
            assert!(feasible > 0);
        }
    }

    /// Plain negation of the coefficients keeps `phi`: `relu(-g) = relu(g) - g`
    /// and `phi(g) = 0` on the span of the small basis.
    #[test]
    fn coefficient_negation_keeps_phi() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let model = build_mip();
        for _ in 0..100 {
            let a = random_coefficients(&mut rng, 14);
            let neg: Vec<Rational> = a.iter().map(|v| -v).collect();
            let x = solution_from_coefficients(&model, &a).unwrap();
            let y = solution_from_coefficients(&model, &neg).unwrap();
            assert_eq!(model.objective_value(&x), model.objective_value(&y));
        }
    }

    #[test]
    fn analog_reflection_is_plain_negation() {
        let m = build_mip_analog_2d();
        let a = [Rational::new(1, 2), Rational::new(-1, 4)];
        let x = solution_from_coefficients(&m, &a).unwrap();
        let r = reflect_solution(&m, &x).unwrap();
        assert_eq!(r.scale, Rational::one());
        assert_eq!(
            &r.solution[..2],
            &[Rational::new(-1, 2), Rational::new(1, 4)]
        );
    }

    #[test]
    fn decode_rejects_wrong_output() {
        let m = build_mip_analog_2d();
        let mut x = solution_from_coefficients(&m, &[Rational::one(), Rational::zero()]).unwrap();
        let y = m.var_index("y0").unwrap();
        x[y] += Rational::one();
        assert!(matches!(
            decode(&m, &x),
            Err(DepthgateError::Inconsistent(_))
        ));
    }

    #[test]
    fn analog_brute_force_is_zero() {
        let m = build_mip_analog_2d();
        assert_eq!(brute_force_optimum(&m).unwrap(), Some(Rational::zero()));
    }

    #[test]
    fn analog_solves_to_zero() {
        let m = build_mip_analog_2d();
        let (sol, decoded) = solve_and_verify(&m, &SolverConfig::default(), None).unwrap();
        assert!(sol.is_optimal());
        assert_eq!(sol.incumbent_value, Some(Rational::zero()));
        assert_eq!(decoded.unwrap().phi, Rational::zero());
    }
}
