/// Fixed-length sequence of 2D states (meters).
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub states: Vec<(f64, f64)>,
}

impl Trajectory {
    pub fn new(states: Vec<(f64, f64)>) -> Self {
        assert!(!states.is_empty(), "trajectory needs at least one state");
        debug_assert!(states.iter().all(|s| s.0.is_finite() && s.1.is_finite()));
        Trajectory { states }
    }

    /// Number of steps T; the trajectory has T+1 states.
    pub fn horizon(&self) -> usize {
        self.states.len() - 1
    }

    pub fn path_length(&self) -> f64 {
        self.states
            .windows(2)
            .map(|w| ((w[1].0 - w[0].0).powi(2) + (w[1].1 - w[0].1).powi(2)).sqrt())
            .sum()
    }

    /// Resample to exactly `n` states by arc-length interpolation. Endpoints
    /// are preserved; degenerate (zero-length) inputs repeat the first state.
    pub fn resample(&self, n: usize) -> Trajectory {
        assert!(n >= 2);
        let total = self.path_length();
        if total <= 0.0 || self.states.len() < 2 {
            return Trajectory::new(vec![self.states[0]; n]);
        }
        let mut cum = Vec::with_capacity(self.states.len());
        cum.push(0.0);
        for w in self.states.windows(2) {
            let d = ((w[1].0 - w[0].0).powi(2) + (w[1].1 - w[0].1).powi(2)).sqrt();
            cum.push(cum.last().unwrap() + d);
        }
        let mut out = Vec::with_capacity(n);
        let mut seg = 0usize;
        for i in 0..n {
            let target = total * i as f64 / (n - 1) as f64;
            while seg + 2 < cum.len() && cum[seg + 1] < target {
                seg += 1;
            }
            let span = cum[seg + 1] - cum[seg];
            let t = if span > 0.0 { (target - cum[seg]) / span } else { 0.0 };
            let (a, b) = (self.states[seg], self.states[seg + 1]);
            out.push((a.0 + t * (b.0 - a.0), a.1 + t * (b.1 - a.1)));
        }
        *out.first_mut().unwrap() = self.states[0];
        *out.last_mut().unwrap() = *self.states.last().unwrap();
        Trajectory::new(out)
    }
}
