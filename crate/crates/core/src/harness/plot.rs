//! Minimal SVG line plots of stopping-time ECDFs on a log-N axis.

use std::fmt::Write;

use super::ecdf::Ecdf;

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];
const W: f64 = 640.0;
const H: f64 = 420.0;
const PAD: f64 = 56.0;

pub struct Series<'a> {
    pub label: String,
    pub ecdf: &'a Ecdf,
    pub dashed: bool,
    pub color: usize,
}

/// Step plot of each series; solid and dashed lines of one color share an ε.
pub fn ecdf_svg(title: &str, series: &[Series<'_>], max_n: u64) -> String {
    let x_max = (max_n.max(10) as f64).log10();
    let sx = |n: f64| PAD + (n.max(1.0).log10() / x_max) * (W - 2.0 * PAD);
    let sy = |f: f64| H - PAD - f * (H - 2.0 * PAD);

    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" font-family="sans-serif" font-size="12">"#);
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="20" text-anchor="middle">{}</text>"#, W / 2.0, escape(title));
    let _ = writeln!(
        s,
        r#"<path d="M{PAD},{top} L{PAD},{b} L{r},{b}" stroke="black" fill="none"/>"#,
        top = PAD,
        b = H - PAD,
        r = W - PAD
    );
    for k in 0..=x_max.floor() as i32 {
        let x = sx(10f64.powi(k));
        let _ = writeln!(s, r#"<text x="{x:.1}" y="{}" text-anchor="middle">1e{k}</text>"#, H - PAD + 16.0);
    }
    for f in [0.0, 0.5, 1.0] {
        let _ = writeln!(s, r#"<text x="{}" y="{:.1}" text-anchor="end">{f}</text>"#, PAD - 6.0, sy(f) + 4.0);
    }
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">stopping time N</text>"#, W / 2.0, H - 14.0);

    for (i, ser) in series.iter().enumerate() {
        let color = PALETTE[ser.color % PALETTE.len()];
        let mut d = format!("M{:.2},{:.2}", sx(1.0), sy(0.0));
        for &n in ser.ecdf.support() {
            let _ = write!(d, " H{:.2} V{:.2}", sx(n as f64), sy(ser.ecdf.eval(n)));
        }
        let _ = write!(d, " H{:.2}", sx(max_n as f64));
        let dash = if ser.dashed { r#" stroke-dasharray="6,4""# } else { "" };
        let _ = writeln!(s, r#"<path d="{d}" stroke="{color}" fill="none" stroke-width="1.5"{dash}/>"#);
        let ly = PAD + 14.0 * i as f64;
        let _ = writeln!(
            s,
            r#"<line x1="{x0}" y1="{ly}" x2="{x1}" y2="{ly}" stroke="{color}"{dash}/><text x="{tx}" y="{ty}">{}</text>"#,
            escape(&ser.label),
            x0 = PAD + 10.0,
            x1 = PAD + 34.0,
            tx = PAD + 40.0,
            ty = ly + 4.0
        );
    }
    s.push_str("</svg>\n");
    s
}

fn escape(t: &str) -> String {
    t.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders_one_path_per_series() {
        let a = Ecdf::new([(10, false), (200, false)]);
        let b = Ecdf::new([(50, false), (500, true)]);
        let svg = ecdf_svg(
            "q = 0.7",
            &[
                Series { label: "a".into(), ecdf: &a, dashed: false, color: 0 },
                Series { label: "b".into(), ecdf: &b, dashed: true, color: 0 },
            ],
            1000,
        );
        assert_eq!(svg.matches("<path d=\"M").count(), 3);
        assert!(svg.contains("stroke-dasharray"));
        assert!(svg.ends_with("</svg>\n"));
    }
}
