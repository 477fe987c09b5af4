//! Nonnegative measures on finite joint domains and the box algebra built on
//! top of them.
//!
//! A [`Measure`] is a dense table indexed little-endian over an ordered scope:
//! the first scope variable cycles fastest, so the linear index of the joint
//! assignment `(x_1, .., x_k)` is `sum_j x_j * prod_{j' < j} d_{j'}`.
//!
//! A [`MeasureBox`] is the set of all measures lying pointwise between a lower
//! and an upper measure. Message sets passed between nodes during propagation
//! are either such a box or the probability simplex of one variable
//! ([`MessageSet`]). The bound operations below only ever look at extreme
//! points: normalization maps convex combinations of measures to convex
//! combinations of the normalized measures, so the smallest bounding box of
//! the image of a convex set is determined by the images of its extreme points.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::factorgraph::VariableId;

/// Upper limit on the number of extreme-point combinations a single bound
/// operation will enumerate.
pub const MAX_ENUMERATION: u128 = 1 << 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Measure {
    scope: Vec<VariableId>,
    cards: Vec<usize>,
    values: Vec<f64>,
}

impl Measure {
    pub fn new(scope: Vec<VariableId>, cards: Vec<usize>, values: Vec<f64>) -> Result<Self> {
        if scope.len() != cards.len() {
            return Err(Error::ScopeMismatch(format!(
                "{} variables but {} domain sizes",
                scope.len(),
                cards.len()
            )));
        }
        let mut seen = BTreeSet::new();
        for &v in &scope {
            if !seen.insert(v) {
                return Err(Error::ScopeMismatch(format!(
                    "variable {v} repeated in scope"
                )));
            }
        }
        if let Some(pos) = cards.iter().position(|&c| c == 0) {
            return Err(Error::ScopeMismatch(format!(
                "variable {} has an empty domain",
                scope[pos]
            )));
        }
        let len = joint_size(&cards);
        if values.len() != len {
            return Err(Error::ScopeMismatch(format!(
                "expected {len} values, got {}",
                values.len()
            )));
        }
        if let Some(&bad) = values.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(Error::ScopeMismatch(format!(
                "measure values must be finite and nonnegative, found {bad}"
            )));
        }
        Ok(Measure {
            scope,
            cards,
            values,
        })
    }

    /// Measure on a single variable.
    pub fn unary(var: VariableId, values: Vec<f64>) -> Result<Self> {
        let card = values.len();
        Measure::new(vec![var], vec![card], values)
    }

    /// Measure on the empty scope.
    pub fn scalar(value: f64) -> Self {
        Measure {
            scope: Vec::new(),
            cards: Vec::new(),
            values: vec![value],
        }
    }

    pub fn constant(scope: Vec<VariableId>, cards: Vec<usize>, value: f64) -> Result<Self> {
        let len = joint_size(&cards);
        Measure::new(scope, cards, vec![value; len])
    }

    /// Point mass on `state` of a single variable.
    pub fn delta(var: VariableId, card: usize, state: usize) -> Self {
        let mut values = vec![0.0; card];
        values[state] = 1.0;
        Measure {
            scope: vec![var],
            cards: vec![card],
            values,
        }
    }

    pub fn scope(&self) -> &[VariableId] {
        &self.scope
    }

    pub fn cards(&self) -> &[usize] {
        &self.cards
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }

    pub fn card_of(&self, var: VariableId) -> Option<usize> {
        self.position(var).map(|p| self.cards[p])
    }

    pub fn position(&self, var: VariableId) -> Option<usize> {
        self.scope.iter().position(|&v| v == var)
    }

    /// Positive rescaling, used by scale-invariance checks.
    pub fn scaled(&self, factor: f64) -> Measure {
        Measure {
            scope: self.scope.clone(),
            cards: self.cards.clone(),
            values: self.values.iter().map(|v| v * factor).collect(),
        }
    }

    pub(crate) fn from_parts_unchecked(
        scope: Vec<VariableId>,
        cards: Vec<usize>,
        values: Vec<f64>,
    ) -> Self {
        debug_assert_eq!(values.len(), joint_size(&cards));
        Measure {
            scope,
            cards,
            values,
        }
    }

    fn same_scope(&self, other: &Measure) -> bool {
        self.scope == other.scope && self.cards == other.cards
    }
}

pub(crate) fn joint_size(cards: &[usize]) -> usize {
    cards.iter().product()
}

/// For every linear index over `(scope, cards)`, the linear index of the
/// restricted assignment over `sub` (a subset of `scope`, in any order).
pub(crate) fn projection_indices(
    scope: &[VariableId],
    cards: &[usize],
    sub: &[VariableId],
) -> Vec<usize> {
    // stride of each full-scope position inside the sub-scope table (0 if absent)
    let mut sub_strides = vec![0usize; scope.len()];
    let mut stride = 1;
    for &v in sub {
        let pos = scope
            .iter()
            .position(|&s| s == v)
            .expect("sub-scope variable missing from scope");
        sub_strides[pos] = stride;
        stride *= cards[pos];
    }
    let len = joint_size(cards);
    let mut out = Vec::with_capacity(len);
    let mut states = vec![0usize; scope.len()];
    let mut idx = 0usize;
    for _ in 0..len {
        out.push(idx);
        for (p, state) in states.iter_mut().enumerate() {
            *state += 1;
            idx += sub_strides[p];
            if *state < cards[p] {
                break;
            }
            idx -= sub_strides[p] * cards[p];
            *state = 0;
        }
    }
    out
}

pub fn partition_sum(m: &Measure) -> f64 {
    m.values.iter().sum()
}

pub fn normalize(m: &Measure) -> Result<Measure> {
    let z = partition_sum(m);
    if z <= 0.0 {
        return Err(Error::ZeroMeasure);
    }
    Ok(Measure {
        scope: m.scope.clone(),
        cards: m.cards.clone(),
        values: m.values.iter().map(|v| v / z).collect(),
    })
}

/// Pointwise product under the natural embedding into the union scope. The
/// result lists `a`'s scope first, then the variables only `b` has.
pub fn multiply(a: &Measure, b: &Measure) -> Result<Measure> {
    let mut scope = a.scope.clone();
    let mut cards = a.cards.clone();
    for (&v, &c) in b.scope.iter().zip(&b.cards) {
        match a.card_of(v) {
            Some(ca) if ca != c => return Err(Error::DomainMismatch(v)),
            Some(_) => {}
            None => {
                scope.push(v);
                cards.push(c);
            }
        }
    }
    let ia = projection_indices(&scope, &cards, &a.scope);
    let ib = projection_indices(&scope, &cards, &b.scope);
    let values = ia
        .iter()
        .zip(&ib)
        .map(|(&i, &j)| a.values[i] * b.values[j])
        .collect();
    Ok(Measure {
        scope,
        cards,
        values,
    })
}

/// Sums out the variables in `drop`; survivors keep their relative order.
pub fn marginalize_out(m: &Measure, drop: &BTreeSet<VariableId>) -> Result<Measure> {
    if let Some(&v) = drop.iter().find(|v| m.position(**v).is_none()) {
        return Err(Error::UnknownVariable(v));
    }
    let (scope, cards): (Vec<_>, Vec<_>) = m
        .scope
        .iter()
        .zip(&m.cards)
        .filter(|(v, _)| !drop.contains(v))
        .map(|(&v, &c)| (v, c))
        .unzip();
    let proj = projection_indices(&m.scope, &m.cards, &scope);
    let mut values = vec![0.0; joint_size(&cards)];
    for (&target, &v) in proj.iter().zip(&m.values) {
        values[target] += v;
    }
    Ok(Measure {
        scope,
        cards,
        values,
    })
}

/// Set of measures lying pointwise between `lower` and `upper`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasureBox {
    lower: Measure,
    upper: Measure,
}

impl MeasureBox {
    pub fn new(lower: Measure, upper: Measure) -> Result<Self> {
        if !lower.same_scope(&upper) {
            return Err(Error::ScopeMismatch(
                "box bounds live on different scopes".into(),
            ));
        }
        if lower.values.iter().zip(&upper.values).any(|(l, u)| l > u) {
            return Err(Error::InvalidArgument(
                "box lower bound exceeds upper bound".into(),
            ));
        }
        Ok(MeasureBox { lower, upper })
    }

    /// Box containing exactly one measure.
    pub fn degenerate(m: Measure) -> Self {
        MeasureBox {
            lower: m.clone(),
            upper: m,
        }
    }

    /// `[0, 1]` in every state: the loosest box containing the simplex.
    pub fn unit(var: VariableId, card: usize) -> Self {
        MeasureBox {
            lower: Measure::from_parts_unchecked(vec![var], vec![card], vec![0.0; card]),
            upper: Measure::from_parts_unchecked(vec![var], vec![card], vec![1.0; card]),
        }
    }

    pub fn lower(&self) -> &Measure {
        &self.lower
    }

    pub fn upper(&self) -> &Measure {
        &self.upper
    }

    pub fn scope(&self) -> &[VariableId] {
        &self.lower.scope
    }

    pub fn cards(&self) -> &[usize] {
        &self.lower.cards
    }

    pub fn is_degenerate(&self) -> bool {
        self.lower.values == self.upper.values
    }

    /// Largest per-state width `max_x (upper(x) - lower(x))`.
    pub fn width(&self) -> f64 {
        self.lower
            .values
            .iter()
            .zip(&self.upper.values)
            .map(|(l, u)| u - l)
            .fold(0.0, f64::max)
    }

    /// Whether `m` lies inside the box, allowing `slack` on either side.
    pub fn contains(&self, m: &Measure, slack: f64) -> bool {
        self.lower.same_scope(m)
            && m.values
                .iter()
                .zip(self.lower.values.iter().zip(&self.upper.values))
                .all(|(x, (l, u))| *x >= l - slack && *x <= u + slack)
    }

    /// Whether `other` lies inside this box, allowing `slack`.
    pub fn encloses(&self, other: &MeasureBox, slack: f64) -> bool {
        self.contains(&other.lower, slack) && self.contains(&other.upper, slack)
    }
}

/// A message: either the whole probability simplex of one variable or a box
/// of measures on that variable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum MessageSet {
    Simplex { var: VariableId, card: usize },
    Box(MeasureBox),
}

impl MessageSet {
    pub fn simplex(var: VariableId, card: usize) -> Self {
        MessageSet::Simplex { var, card }
    }

    pub fn from_box(b: MeasureBox) -> Result<Self> {
        if b.scope().len() != 1 {
            return Err(Error::ScopeMismatch(format!(
                "message boxes live on one variable, got {}",
                b.scope().len()
            )));
        }
        Ok(MessageSet::Box(b))
    }

    pub fn var(&self) -> VariableId {
        match self {
            MessageSet::Simplex { var, .. } => *var,
            MessageSet::Box(b) => b.scope()[0],
        }
    }

    pub fn card(&self) -> usize {
        match self {
            MessageSet::Simplex { card, .. } => *card,
            MessageSet::Box(b) => b.cards()[0],
        }
    }

    pub fn is_simplex(&self) -> bool {
        matches!(self, MessageSet::Simplex { .. })
    }

    /// Smallest box containing the set.
    pub fn to_box(&self) -> MeasureBox {
        match self {
            MessageSet::Simplex { var, card } => MeasureBox::unit(*var, *card),
            MessageSet::Box(b) => b.clone(),
        }
    }
}

/// Number of corners of `b` once corners agreeing in every state are merged.
fn corner_count(b: &MeasureBox) -> u128 {
    let free = b
        .lower
        .values
        .iter()
        .zip(&b.upper.values)
        .filter(|(l, u)| l < u)
        .count();
    1u128.checked_shl(free as u32).unwrap_or(u128::MAX)
}

fn box_corners(b: &MeasureBox) -> Result<Vec<Measure>> {
    let needed = corner_count(b);
    if needed > MAX_ENUMERATION {
        return Err(Error::CapacityExceeded {
            what: "box corner enumeration",
            needed,
            limit: MAX_ENUMERATION,
        });
    }
    let free: Vec<usize> = (0..b.lower.len())
        .filter(|&k| b.lower.values[k] < b.upper.values[k])
        .collect();
    let mut out = Vec::with_capacity(needed as usize);
    for mask in 0..(1usize << free.len()) {
        let mut values = b.lower.values.clone();
        for (bit, &k) in free.iter().enumerate() {
            if mask >> bit & 1 == 1 {
                values[k] = b.upper.values[k];
            }
        }
        out.push(Measure::from_parts_unchecked(
            b.lower.scope.clone(),
            b.lower.cards.clone(),
            values,
        ));
    }
    Ok(out)
}

/// Extreme points of a message set: the point masses of a simplex, or the
/// distinct corners of a box.
pub fn extreme_points(ms: &MessageSet) -> Result<Vec<Measure>> {
    match ms {
        MessageSet::Simplex { var, card } => {
            Ok((0..*card).map(|s| Measure::delta(*var, *card, s)).collect())
        }
        MessageSet::Box(b) => box_corners(b),
    }
}

/// Pointwise min/max envelope of a nonempty list of measures on one scope.
pub fn smallest_bounding_box(points: &[Measure]) -> Result<MeasureBox> {
    let (first, rest) = points.split_first().ok_or(Error::EmptyPointSet)?;
    let mut lower = first.clone();
    let mut upper = first.clone();
    for p in rest {
        if !p.same_scope(first) {
            return Err(Error::ScopeMismatch(
                "bounding box points live on different scopes".into(),
            ));
        }
        for (k, &v) in p.values.iter().enumerate() {
            lower.values[k] = lower.values[k].min(v);
            upper.values[k] = upper.values[k].max(v);
        }
    }
    Ok(MeasureBox { lower, upper })
}

/// Running pointwise min/max, used where the point set is streamed.
struct Envelope {
    lower: Vec<f64>,
    upper: Vec<f64>,
    seen: bool,
}

impl Envelope {
    fn new(len: usize) -> Self {
        Envelope {
            lower: vec![f64::INFINITY; len],
            upper: vec![f64::NEG_INFINITY; len],
            seen: false,
        }
    }

    /// Adds the normalization of `point`.
    fn push_normalized(&mut self, point: &[f64]) -> Result<()> {
        let z: f64 = point.iter().sum();
        if z <= 0.0 {
            return Err(Error::ZeroMeasure);
        }
        for (k, &v) in point.iter().enumerate() {
            let p = v / z;
            self.lower[k] = self.lower[k].min(p);
            self.upper[k] = self.upper[k].max(p);
        }
        self.seen = true;
        Ok(())
    }

    fn finish(self, scope: Vec<VariableId>, cards: Vec<usize>) -> Result<MeasureBox> {
        if !self.seen {
            return Err(Error::ZeroMeasure);
        }
        Ok(MeasureBox {
            lower: Measure::from_parts_unchecked(scope.clone(), cards.clone(), self.lower),
            upper: Measure::from_parts_unchecked(scope, cards, self.upper),
        })
    }
}

/// Product of boxes sharing one scope: lowers multiply, uppers multiply.
pub fn box_product_same_scope(boxes: &[MeasureBox]) -> Result<MeasureBox> {
    let (first, rest) = boxes.split_first().ok_or(Error::EmptyPointSet)?;
    let mut out = first.clone();
    for b in rest {
        if !b.lower.same_scope(&out.lower) {
            return Err(Error::ScopeMismatch(
                "same-scope box product over different scopes".into(),
            ));
        }
        for k in 0..out.lower.len() {
            out.lower.values[k] *= b.lower.values[k];
            out.upper.values[k] *= b.upper.values[k];
        }
    }
    Ok(out)
}

/// Bounding box of the product of boxes on pairwise disjoint scopes: the
/// outer product of the lowers and of the uppers, on the concatenated scope.
pub fn box_product_disjoint_sbb(boxes: &[MeasureBox]) -> Result<MeasureBox> {
    let (first, rest) = boxes.split_first().ok_or(Error::EmptyPointSet)?;
    let mut seen: BTreeSet<VariableId> = first.scope().iter().copied().collect();
    let mut lower = first.lower.clone();
    let mut upper = first.upper.clone();
    for b in rest {
        for &v in b.scope() {
            if !seen.insert(v) {
                return Err(Error::OverlappingScopes(v));
            }
        }
        lower = multiply(&lower, &b.lower)?;
        upper = multiply(&upper, &b.upper)?;
    }
    Ok(MeasureBox { lower, upper })
}

/// Smallest bounding box of the normalized members of `b`.
///
/// Zero corners are skipped: a nonzero member of the box is a convex
/// combination of corners, and its normalization is a convex combination of
/// the normalized nonzero corners only.
pub fn normalized_bounding_box(b: &MeasureBox) -> Result<MeasureBox> {
    let mut env = Envelope::new(b.lower.len());
    for corner in box_corners(b)? {
        if corner.is_zero() {
            continue;
        }
        env.push_normalized(&corner.values)?;
    }
    env.finish(b.lower.scope.clone(), b.lower.cards.clone())
}

fn check_factor_keep(factor: &Measure, keep: VariableId) -> Result<usize> {
    factor.position(keep).ok_or(Error::UnknownVariable(keep))
}

/// Bounds the normalized sum-product `N(sum_{x \ keep} psi * prod_l m_l)` over
/// all choices of `m_l` from the incoming message sets, one per scope
/// variable other than `keep`.
///
/// Enumerates every combination of extreme points. Combinations that pick
/// the zero measure from a box are skipped, since true messages are never
/// zero; any other combination whose image vanishes is a `ZeroMeasure`.
pub fn bound_sum_product(
    factor: &Measure,
    keep: VariableId,
    incoming: &BTreeMap<VariableId, MessageSet>,
) -> Result<MeasureBox> {
    let keep_pos = check_factor_keep(factor, keep)?;
    let arity = factor.scope.len();
    let mut points: Vec<Vec<Measure>> = Vec::with_capacity(arity.saturating_sub(1));
    let mut positions = Vec::with_capacity(arity.saturating_sub(1));
    for (p, (&v, &c)) in factor.scope.iter().zip(&factor.cards).enumerate() {
        if p == keep_pos {
            continue;
        }
        let ms = incoming.get(&v).ok_or(Error::UnknownVariable(v))?;
        if ms.var() != v {
            return Err(Error::ScopeMismatch(format!(
                "message keyed by {v} lives on {}",
                ms.var()
            )));
        }
        if ms.card() != c {
            return Err(Error::DomainMismatch(v));
        }
        let pts: Vec<Measure> = extreme_points(ms)?
            .into_iter()
            .filter(|m| !m.is_zero())
            .collect();
        if pts.is_empty() {
            return Err(Error::ZeroMeasure);
        }
        points.push(pts);
        positions.push(p);
    }
    if incoming.len() != points.len() {
        let extra = incoming
            .keys()
            .find(|v| factor.position(**v).is_none_or(|p| p == keep_pos))
            .copied()
            .unwrap_or(keep);
        return Err(Error::ScopeMismatch(format!(
            "unexpected incoming message for variable {extra}"
        )));
    }

    let needed = points
        .iter()
        .try_fold(1u128, |acc, p| acc.checked_mul(p.len() as u128))
        .unwrap_or(u128::MAX);
    if needed > MAX_ENUMERATION {
        return Err(Error::CapacityExceeded {
            what: "sum-product extreme-point enumeration",
            needed,
            limit: MAX_ENUMERATION,
        });
    }

    // Decode each table entry once: (keep state, state of each other variable).
    let keep_card = factor.cards[keep_pos];
    let mut entry_keep = Vec::with_capacity(factor.len());
    let mut entry_states = Vec::with_capacity(factor.len() * positions.len());
    let mut states = vec![0usize; arity];
    for _ in 0..factor.len() {
        entry_keep.push(states[keep_pos]);
        entry_states.extend(positions.iter().map(|&p| states[p]));
        for (p, s) in states.iter_mut().enumerate() {
            *s += 1;
            if *s < factor.cards[p] {
                break;
            }
            *s = 0;
        }
    }

    let width = positions.len();
    let mut env = Envelope::new(keep_card);
    let mut choice = vec![0usize; width];
    let mut image = vec![0.0; keep_card];
    loop {
        image.iter_mut().for_each(|x| *x = 0.0);
        for (e, &psi) in factor.values.iter().enumerate() {
            if psi == 0.0 {
                continue;
            }
            let mut w = psi;
            for (slot, &s) in entry_states[e * width..(e + 1) * width].iter().enumerate() {
                w *= points[slot][choice[slot]].values[s];
            }
            image[entry_keep[e]] += w;
        }
        env.push_normalized(&image)?;

        // advance the mixed-radix counter over extreme-point choices
        let mut slot = 0;
        loop {
            if slot == width {
                return env.finish(vec![keep], vec![keep_card]);
            }
            choice[slot] += 1;
            if choice[slot] < points[slot].len() {
                break;
            }
            choice[slot] = 0;
            slot += 1;
        }
    }
}

/// Looser variant of [`bound_sum_product`] for incoming measures that need
/// not factorize: the incoming set is one joint box on `scope \ {keep}` and
/// its corners are enumerated directly.
pub fn bound_sum_product_joint(
    factor: &Measure,
    keep: VariableId,
    incoming_joint: &MeasureBox,
) -> Result<MeasureBox> {
    let keep_pos = check_factor_keep(factor, keep)?;
    let joint_scope = incoming_joint.scope();
    if joint_scope.len() + 1 != factor.scope.len() || joint_scope.contains(&keep) {
        return Err(Error::ScopeMismatch(
            "joint box must cover exactly the factor scope without the kept variable".into(),
        ));
    }
    for (&v, &c) in joint_scope.iter().zip(incoming_joint.cards()) {
        match factor.card_of(v) {
            None => return Err(Error::UnknownVariable(v)),
            Some(fc) if fc != c => return Err(Error::DomainMismatch(v)),
            Some(_) => {}
        }
    }
    let needed = corner_count(incoming_joint);
    if needed > MAX_ENUMERATION {
        return Err(Error::CapacityExceeded {
            what: "joint box corner enumeration",
            needed,
            limit: MAX_ENUMERATION,
        });
    }

    // Linear map from the joint box's measure space to measures on `keep`:
    // column j of `matrix` is psi restricted to joint state j.
    let keep_card = factor.cards[keep_pos];
    let joint_len = incoming_joint.lower.len();
    let to_joint = projection_indices(&factor.scope, &factor.cards, joint_scope);
    let to_keep = projection_indices(&factor.scope, &factor.cards, &[keep]);
    let mut matrix = vec![0.0; joint_len * keep_card];
    for (e, &psi) in factor.values.iter().enumerate() {
        matrix[to_joint[e] * keep_card + to_keep[e]] += psi;
    }

    let lower = &incoming_joint.lower.values;
    let upper = &incoming_joint.upper.values;
    let free: Vec<usize> = (0..joint_len).filter(|&j| lower[j] < upper[j]).collect();
    let mut base = vec![0.0; keep_card];
    for (j, &l) in lower.iter().enumerate() {
        if l != 0.0 {
            for (k, b) in base.iter_mut().enumerate() {
                *b += matrix[j * keep_card + k] * l;
            }
        }
    }
    let lower_is_zero = lower.iter().all(|&l| l == 0.0);

    // steps[b] is column free[b] scaled by that state's width
    let steps: Vec<f64> = free
        .iter()
        .flat_map(|&j| {
            let delta = upper[j] - lower[j];
            matrix[j * keep_card..(j + 1) * keep_card]
                .iter()
                .map(move |a| a * delta)
        })
        .collect();

    // Binary counting over the free states. partial[t] holds base plus the
    // chosen columns for bits >= t, so moving to the next corner touches only
    // the bits the increment changed. Every term is nonnegative, so no
    // cancellation occurs.
    let n = free.len();
    let mut partial = base.repeat(n + 1);
    let mut env = Envelope::new(keep_card);
    if !lower_is_zero {
        env.push_normalized(&base)?;
    }
    for i in 1..(1usize << n) {
        let t = i.trailing_zeros() as usize;
        let (below, above) = partial.split_at_mut((t + 1) * keep_card);
        let dst = &mut below[t * keep_card..];
        for ((x, p), d) in dst
            .iter_mut()
            .zip(&above[..keep_card])
            .zip(&steps[t * keep_card..])
        {
            *x = p + d;
        }
        for k in (0..t).rev() {
            partial.copy_within((k + 1) * keep_card..(k + 2) * keep_card, k * keep_card);
        }
        env.push_normalized(&partial[..keep_card])?;
    }
    env.finish(vec![keep], vec![keep_card])
}

#[cfg(test)]
mod tests {
    use super::*;

    const TOL: f64 = 1e-12;

    fn v(i: usize) -> VariableId {
        VariableId(i)
    }

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    fn flip_psi(a: usize, b: usize) -> Measure {
        Measure::new(vec![v(a), v(b)], vec![2, 2], vec![1.0, 2.0, 2.0, 1.0]).unwrap()
    }

    fn unary_box(var: usize, lo: &[f64], hi: &[f64]) -> MeasureBox {
        MeasureBox::new(
            Measure::unary(v(var), lo.to_vec()).unwrap(),
            Measure::unary(v(var), hi.to_vec()).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn partition_sums() {
        assert_eq!(
            partition_sum(&Measure::unary(v(0), vec![1.0, 2.0]).unwrap()),
            3.0
        );
        assert_eq!(partition_sum(&flip_psi(0, 1)), 6.0);
        assert_eq!(
            partition_sum(&Measure::unary(v(0), vec![0.0, 0.0]).unwrap()),
            0.0
        );
    }

    #[test]
    fn normalize_cases() {
        let n = normalize(&Measure::unary(v(0), vec![1.0, 2.0]).unwrap()).unwrap();
        assert!(close(n.values(), &[1.0 / 3.0, 2.0 / 3.0], TOL));
        let half = Measure::unary(v(0), vec![0.5, 0.5]).unwrap();
        assert_eq!(normalize(&half).unwrap(), half);
        assert_eq!(
            normalize(&Measure::unary(v(0), vec![0.0, 0.0]).unwrap()),
            Err(Error::ZeroMeasure)
        );
    }

    #[test]
    fn multiply_disjoint_is_little_endian_outer_product() {
        let a = Measure::unary(v(0), vec![1.0, 2.0]).unwrap();
        let b = Measure::unary(v(1), vec![3.0, 4.0]).unwrap();
        let p = multiply(&a, &b).unwrap();
        assert_eq!(p.scope(), &[v(0), v(1)]);
        assert_eq!(p.values(), &[3.0, 6.0, 4.0, 8.0]);
    }

    #[test]
    fn multiply_same_scope_and_embedding() {
        let a = flip_psi(0, 1);
        let sq = multiply(&a, &a).unwrap();
        assert_eq!(sq.values(), &[1.0, 4.0, 4.0, 1.0]);

        let ones = Measure::constant(vec![v(2)], vec![3], 1.0).unwrap();
        let e = multiply(&a, &ones).unwrap();
        assert_eq!(e.scope(), &[v(0), v(1), v(2)]);
        assert_eq!(e.values(), [a.values(), a.values(), a.values()].concat());
    }

    #[test]
    fn multiply_rejects_domain_mismatch() {
        let a = Measure::unary(v(0), vec![1.0, 2.0]).unwrap();
        let b = Measure::unary(v(0), vec![1.0, 2.0, 3.0]).unwrap();
        assert_eq!(multiply(&a, &b), Err(Error::DomainMismatch(v(0))));
    }

    #[test]
    fn marginalize_cases() {
        let psi = flip_psi(0, 1);
        let m = marginalize_out(&psi, &[v(1)].into()).unwrap();
        assert_eq!(m.scope(), &[v(0)]);
        assert_eq!(m.values(), &[3.0, 3.0]);
        assert_eq!(marginalize_out(&psi, &BTreeSet::new()).unwrap(), psi);
        let all = marginalize_out(&psi, &[v(0), v(1)].into()).unwrap();
        assert!(all.scope().is_empty());
        assert_eq!(all.values(), &[6.0]);
        assert_eq!(
            marginalize_out(&psi, &[v(7)].into()),
            Err(Error::UnknownVariable(v(7)))
        );
    }

    #[test]
    fn extreme_points_of_simplex_and_boxes() {
        let s = extreme_points(&MessageSet::simplex(v(0), 2)).unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s[0].values(), &[1.0, 0.0]);
        assert_eq!(s[1].values(), &[0.0, 1.0]);

        let b = unary_box(0, &[1.0 / 3.0, 1.0 / 3.0], &[2.0 / 3.0, 2.0 / 3.0]);
        let c = extreme_points(&MessageSet::Box(b)).unwrap();
        let got: Vec<Vec<f64>> = c.iter().map(|m| m.values().to_vec()).collect();
        let t = 1.0 / 3.0;
        let s2 = 2.0 / 3.0;
        for want in [[t, t], [s2, t], [t, s2], [s2, s2]] {
            assert!(got.iter().any(|g| close(g, &want, 0.0)));
        }
        assert_eq!(got.len(), 4);

        let d = MeasureBox::degenerate(Measure::unary(v(0), vec![0.25, 0.75]).unwrap());
        assert_eq!(extreme_points(&MessageSet::Box(d)).unwrap().len(), 1);

        let partial = unary_box(0, &[0.2, 0.5, 0.1], &[0.4, 0.5, 0.3]);
        assert_eq!(extreme_points(&MessageSet::Box(partial)).unwrap().len(), 4);
    }

    #[test]
    fn sbb_cases() {
        let pts: Vec<Measure> = [[0.2, 0.8], [0.8, 0.2], [0.5, 0.5]]
            .iter()
            .map(|p| Measure::unary(v(0), p.to_vec()).unwrap())
            .collect();
        let b = smallest_bounding_box(&pts).unwrap();
        assert!(close(b.lower().values(), &[0.2, 0.2], TOL));
        assert!(close(b.upper().values(), &[0.8, 0.8], TOL));

        let one = smallest_bounding_box(&pts[..1]).unwrap();
        assert!(one.is_degenerate());

        let deltas = extreme_points(&MessageSet::simplex(v(0), 2)).unwrap();
        let full = smallest_bounding_box(&deltas).unwrap();
        assert_eq!(full, MeasureBox::unit(v(0), 2));

        assert_eq!(smallest_bounding_box(&[]), Err(Error::EmptyPointSet));
        let other = Measure::unary(v(1), vec![0.5, 0.5]).unwrap();
        assert!(matches!(
            smallest_bounding_box(&[pts[0].clone(), other]),
            Err(Error::ScopeMismatch(_))
        ));
    }

    #[test]
    fn sbb_of_box_corners_is_the_box() {
        let b = unary_box(3, &[0.1, 0.0, 0.3], &[0.4, 0.2, 0.3]);
        let corners = extreme_points(&MessageSet::Box(b.clone())).unwrap();
        assert_eq!(smallest_bounding_box(&corners).unwrap(), b);
    }

    #[test]
    fn same_scope_products() {
        let b = unary_box(0, &[1.0 / 3.0, 1.0 / 3.0], &[2.0 / 3.0, 2.0 / 3.0]);
        let p = box_product_same_scope(&[b.clone(), b.clone()]).unwrap();
        assert!(close(p.lower().values(), &[1.0 / 9.0, 1.0 / 9.0], TOL));
        assert!(close(p.upper().values(), &[4.0 / 9.0, 4.0 / 9.0], TOL));

        let ones = MeasureBox::degenerate(Measure::constant(vec![v(0)], vec![2], 1.0).unwrap());
        assert_eq!(box_product_same_scope(&[b.clone(), ones]).unwrap(), b);

        // [a,b]*[c,d] = [ac, bd] with a = 0
        let z = unary_box(0, &[0.0, 0.0], &[0.5, 0.5]);
        let w = unary_box(0, &[0.2, 0.2], &[0.6, 0.6]);
        let p = box_product_same_scope(&[z, w]).unwrap();
        assert!(close(p.lower().values(), &[0.0, 0.0], TOL));
        assert!(close(p.upper().values(), &[0.3, 0.3], TOL));

        let other = unary_box(1, &[0.0, 0.0], &[1.0, 1.0]);
        assert!(box_product_same_scope(&[b, other]).is_err());
    }

    #[test]
    fn disjoint_products() {
        let a = unary_box(0, &[1.0, 1.0], &[2.0, 2.0]);
        let b = unary_box(1, &[3.0, 3.0], &[4.0, 4.0]);
        let p = box_product_disjoint_sbb(&[a.clone(), b.clone()]).unwrap();
        assert_eq!(p.scope(), &[v(0), v(1)]);
        assert_eq!(p.lower().values(), &[3.0; 4]);
        assert_eq!(p.upper().values(), &[8.0; 4]);

        assert_eq!(
            box_product_disjoint_sbb(std::slice::from_ref(&a)).unwrap(),
            a
        );

        let d = MeasureBox::degenerate(Measure::unary(v(1), vec![0.25, 0.75]).unwrap());
        let p = box_product_disjoint_sbb(&[a.clone(), d]).unwrap();
        // fixing x_0, the box is degenerate along x_1's direction
        assert_eq!(p.lower().values(), &[0.25, 0.25, 0.75, 0.75]);
        assert_eq!(p.upper().values(), &[0.5, 0.5, 1.5, 1.5]);

        assert_eq!(
            box_product_disjoint_sbb(&[a.clone(), a]),
            Err(Error::OverlappingScopes(v(0)))
        );
    }

    #[test]
    fn sum_product_with_simplex_incoming() {
        let psi = flip_psi(0, 1);
        let incoming = BTreeMap::from([(v(1), MessageSet::simplex(v(1), 2))]);
        let b = bound_sum_product(&psi, v(0), &incoming).unwrap();
        assert!(close(b.lower().values(), &[1.0 / 3.0, 1.0 / 3.0], TOL));
        assert!(close(b.upper().values(), &[2.0 / 3.0, 2.0 / 3.0], TOL));
    }

    #[test]
    fn sum_product_with_box_incoming() {
        let psi = flip_psi(0, 2);
        let third = unary_box(2, &[1.0 / 3.0, 1.0 / 3.0], &[2.0 / 3.0, 2.0 / 3.0]);
        let incoming = BTreeMap::from([(v(2), MessageSet::Box(third))]);
        let b = bound_sum_product(&psi, v(0), &incoming).unwrap();
        assert!(close(b.lower().values(), &[4.0 / 9.0, 4.0 / 9.0], TOL));
        assert!(close(b.upper().values(), &[5.0 / 9.0, 5.0 / 9.0], TOL));
    }

    #[test]
    fn uniform_factor_gives_degenerate_uniform_box() {
        let psi = Measure::constant(vec![v(0), v(1), v(2)], vec![3, 2, 2], 1.0).unwrap();
        let incoming = BTreeMap::from([
            (v(0), MessageSet::simplex(v(0), 3)),
            (
                v(2),
                MessageSet::Box(unary_box(2, &[0.1, 0.3], &[0.7, 0.9])),
            ),
        ]);
        let b = bound_sum_product(&psi, v(1), &incoming).unwrap();
        assert!(close(b.lower().values(), &[0.5, 0.5], TOL));
        assert!(close(b.upper().values(), &[0.5, 0.5], TOL));
    }

    #[test]
    fn sum_product_argument_errors() {
        let psi = flip_psi(0, 1);
        assert_eq!(
            bound_sum_product(&psi, v(5), &BTreeMap::new()),
            Err(Error::UnknownVariable(v(5)))
        );
        assert_eq!(
            bound_sum_product(&psi, v(0), &BTreeMap::new()),
            Err(Error::UnknownVariable(v(1)))
        );
        let wrong_card = BTreeMap::from([(v(1), MessageSet::simplex(v(1), 3))]);
        assert_eq!(
            bound_sum_product(&psi, v(0), &wrong_card),
            Err(Error::DomainMismatch(v(1)))
        );
        let extra = BTreeMap::from([
            (v(1), MessageSet::simplex(v(1), 2)),
            (v(4), MessageSet::simplex(v(4), 2)),
        ]);
        assert!(matches!(
            bound_sum_product(&psi, v(0), &extra),
            Err(Error::ScopeMismatch(_))
        ));
    }

    #[test]
    fn zero_image_is_reported() {
        // psi vanishes whenever x_1 = 1, so the delta on state 1 has no image
        let psi = Measure::new(vec![v(0), v(1)], vec![2, 2], vec![1.0, 1.0, 0.0, 0.0]).unwrap();
        let incoming = BTreeMap::from([(v(1), MessageSet::simplex(v(1), 2))]);
        assert_eq!(
            bound_sum_product(&psi, v(0), &incoming),
            Err(Error::ZeroMeasure)
        );
    }

    #[test]
    fn capacity_is_enforced() {
        let card = 21;
        let b = MeasureBox::new(
            Measure::constant(vec![v(0)], vec![card], 0.0).unwrap(),
            Measure::constant(vec![v(0)], vec![card], 1.0).unwrap(),
        )
        .unwrap();
        assert!(matches!(
            extreme_points(&MessageSet::Box(b)),
            Err(Error::CapacityExceeded { .. })
        ));
    }

    #[test]
    fn joint_matches_factorized_on_pairwise_factors() {
        let psi = Measure::new(
            vec![v(0), v(1)],
            vec![3, 2],
            vec![0.3, 1.2, 2.0, 0.7, 0.1, 1.5],
        )
        .unwrap();
        let msgs = [
            MessageSet::simplex(v(0), 3),
            MessageSet::Box(unary_box(0, &[0.1, 0.2, 0.05], &[0.5, 0.6, 0.3])),
        ];
        for ms in msgs {
            let a = bound_sum_product(&psi, v(1), &BTreeMap::from([(v(0), ms.clone())])).unwrap();
            let b = bound_sum_product_joint(&psi, v(1), &ms.to_box()).unwrap();
            assert!(close(a.lower().values(), b.lower().values(), TOL));
            assert!(close(a.upper().values(), b.upper().values(), TOL));
        }
    }

    #[test]
    fn joint_with_degenerate_box_is_a_point() {
        let psi = Measure::new(
            vec![v(0), v(1), v(2)],
            vec![2, 2, 2],
            vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0],
        )
        .unwrap();
        let point = Measure::new(vec![v(1), v(2)], vec![2, 2], vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        let b =
            bound_sum_product_joint(&psi, v(0), &MeasureBox::degenerate(point.clone())).unwrap();
        assert!(b.is_degenerate());
        let want = normalize(
            &marginalize_out(&multiply(&psi, &point).unwrap(), &[v(1), v(2)].into()).unwrap(),
        )
        .unwrap();
        assert!(close(b.lower().values(), want.values(), TOL));
    }

    #[test]
    fn joint_argument_errors() {
        let psi = flip_psi(0, 1);
        let wrong = MeasureBox::unit(v(0), 2);
        assert!(matches!(
            bound_sum_product_joint(&psi, v(0), &wrong),
            Err(Error::ScopeMismatch(_))
        ));
        assert_eq!(
            bound_sum_product_joint(&psi, v(0), &MeasureBox::unit(v(1), 3)),
            Err(Error::DomainMismatch(v(1)))
        );
    }

    #[test]
    fn normalized_bounding_box_skips_zero_corner() {
        let b = MeasureBox::unit(v(0), 3);
        let n = normalized_bounding_box(&b).unwrap();
        assert_eq!(n, MeasureBox::unit(v(0), 3));
        let zero = MeasureBox::degenerate(Measure::constant(vec![v(0)], vec![2], 0.0).unwrap());
        assert_eq!(normalized_bounding_box(&zero), Err(Error::ZeroMeasure));
    }
}
