use super::Trajectory;

/// Which sign changes count as an event.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Rising,
    Falling,
    Any,
}

type Observable<'a, const N: usize> = Box<dyn Fn(f64, &[f64; N]) -> f64 + 'a>;

/// A scalar observable whose zeros are events.
pub struct EventSpec<'a, const N: usize> {
    pub name: String,
    pub observable: Observable<'a, N>,
    pub direction: Direction,
}

impl<'a, const N: usize> EventSpec<'a, N> {
    pub fn new(
        name: impl Into<String>,
        direction: Direction,
        observable: impl Fn(f64, &[f64; N]) -> f64 + 'a,
    ) -> Self {
        Self {
            name: name.into(),
            observable: Box::new(observable),
            direction,
        }
    }

    /// Event when component `index` crosses `level`.
    pub fn level(name: impl Into<String>, index: usize, level: f64, direction: Direction) -> Self {
        Self::new(name, direction, move |_, y: &[f64; N]| y[index] - level)
    }

    fn accepts(&self, before: f64, after: f64) -> bool {
        let rising = before < 0.0 && after >= 0.0;
        let falling = before > 0.0 && after <= 0.0;
        match self.direction {
            Direction::Rising => rising,
            Direction::Falling => falling,
            Direction::Any => rising || falling,
        }
    }
}

/// Time accuracy of located events.
pub const EVENT_TIME_TOL: f64 = 1e-12;

/// Earliest crossing after `search_from`, located by scanning knot
/// intervals for a sign change and bisecting the dense output.
///
/// A root sitting exactly on `search_from` is not reported.
pub fn find_event<const N: usize>(
    traj: &Trajectory<N>,
    spec: &EventSpec<'_, N>,
    search_from: f64,
) -> Option<f64> {
    let g = |t: f64| (spec.observable)(t, &traj.eval_unchecked(t));
    let knots = traj.knots();
    let t_stop = traj.t_stop();
    if search_from >= t_stop {
        return None;
    }
    let first = knots.partition_point(|&k| k <= search_from);
    let mut a = search_from.max(traj.t_start());
    let mut ga = g(a);
    for &b in knots[first..].iter() {
        let gb = g(b);
        if spec.accepts(ga, gb) {
            return Some(bisect(&g, a, b, ga));
        }
        a = b;
        ga = gb;
    }
    None
}

fn bisect(g: &impl Fn(f64) -> f64, mut a: f64, mut b: f64, ga: f64) -> f64 {
    let sa = ga.signum();
    while b - a > EVENT_TIME_TOL {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        let gm = g(m);
        if gm == 0.0 {
            return m;
        }
        if gm.signum() == sa {
            a = m;
        } else {
            b = m;
        }
    }
    b
}
