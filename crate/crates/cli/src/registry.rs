//! Named experiments, each tied to one claim about stochastic Burgers turbulence.

pub struct Entry {
    pub name: &'static str,
    pub anchor: &'static str,
    pub summary: &'static str,
}

/// Alphabetical.
pub const REGISTRY: &[Entry] = &[
    Entry { name: "dissipation-scale", anchor: "Mathematical dissipation scale", summary: "spectral breakpoints k*(nu) over a viscosity sweep; fits l_d = nu^gamma" },
    Entry { name: "energy-balance", anchor: "nu <<|u|_1^2>> = B0/2", summary: "stationary dissipation rate against half the forcing intensity" },
    Entry { name: "entropy-stats", anchor: "no dissipation range for entropy solutions", summary: "structure functions and spectrum of certified inviscid limits" },
    Entry { name: "four-fifths", anchor: "−6B₀l + o(l)", summary: "signed third-order structure function slope" },
    Entry { name: "kruzkov", anchor: "|u^nu2 - u^nu1|_p <= C (nu2 - nu1)^alpha_p", summary: "pathwise convergence rate under a shared noise path" },
    Entry { name: "mixing", anchor: "unique stationary measure, loss of memory", summary: "coupled L1 distances and functional gaps between two initial laws" },
    Entry { name: "oleinik", anchor: "u_x <= C/t uniformly in nu", summary: "one-sided slope, sup norm and total variation audits" },
    Entry { name: "scaling-symmetry", anchor: "w(tau, y) = mu u(mu tau, y)", summary: "deterministic time-amplitude rescaling with nu -> mu nu" },
    Entry { name: "sobolev-scaling", anchor: "<<|u|_m^2>> ~ nu^-(2m-1)", summary: "Sobolev moments over a viscosity sweep" },
    Entry { name: "spectrum", anchor: "E_k ~ k^-2", summary: "layer-averaged energy spectrum and its power-law fit" },
    Entry { name: "structure", anchor: "S_{p,l} ~ l^min(1,p)", summary: "absolute structure functions and inertial/dissipation fits" },
];

pub fn find(name: &str) -> Option<&'static Entry> {
    REGISTRY.iter().find(|e| e.name == name)
}

pub fn listing() -> String {
    REGISTRY.iter().map(|e| format!("{:<18} {}\n{:<18} {}\n", e.name, e.anchor, "", e.summary)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sorted_and_anchored() {
        let names: Vec<&str> = REGISTRY.iter().map(|e| e.name).collect();
        let mut sorted = names.clone();
        sorted.sort();
        assert_eq!(names, sorted);
        assert_eq!(find("four-fifths").unwrap().anchor, "−6B₀l + o(l)");
        assert_eq!(find("dissipation-scale").unwrap().anchor, "Mathematical dissipation scale");
        assert!(listing().contains("four-fifths"));
    }
}
