use std::io::Write;
use std::path::Path;

use mdim_core::rational::format_q;
use mdim_core::Q;

pub const HEADER: &str = "system,quantity,subset,n,epsilon,delta,s,N,bound_type,method,value,seed,config_hash";

/// One CSV row before the run-level `seed` and `config_hash` are attached.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Record {
    pub system: String,
    pub quantity: String,
    pub subset: String,
    pub n: Option<usize>,
    pub epsilon: Option<Q>,
    pub delta: Option<Q>,
    pub s: Option<f64>,
    pub big_n: Option<usize>,
    pub bound_type: String,
    pub method: String,
    pub value: f64,
}

/// `%.12g`-style rendering.
pub fn fmt_real(v: f64) -> String {
    if v.is_nan() {
        return "nan".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if v == 0.0 {
        return "0".into();
    }
    let sci = format!("{:.11e}", v);
    let (mant, exp) = sci.split_once('e').unwrap();
    let exp: i32 = exp.parse().unwrap();
    if (-5..12).contains(&exp) {
        let s = format!("{:.*}", (11 - exp).max(0) as usize, v);
        trim(&s)
    } else {
        format!("{}e{}", trim(mant), exp)
    }
}

fn trim(s: &str) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s.to_string()
    }
}

fn opt<T>(v: &Option<T>, f: impl Fn(&T) -> String) -> String {
    v.as_ref().map(f).unwrap_or_default()
}

fn escape(field: &str) -> String {
    if field.contains([',', '"', '\n']) {
        format!("\"{}\"", field.replace('"', "\"\""))
    } else {
        field.to_string()
    }
}

impl Record {
    fn fields(&self) -> [String; 11] {
        [
            self.system.clone(),
            self.quantity.clone(),
            self.subset.clone(),
            opt(&self.n, |v| v.to_string()),
            opt(&self.epsilon, format_q),
            opt(&self.delta, format_q),
            opt(&self.s, |v| fmt_real(*v)),
            opt(&self.big_n, |v| v.to_string()),
            self.bound_type.clone(),
            self.method.clone(),
            fmt_real(self.value),
        ]
    }
}

/// Header plus rows sorted by every column but the value.
pub fn render_csv(records: &[Record], seed: u64, hash: &str) -> String {
    let mut rows: Vec<[String; 11]> = records.iter().map(Record::fields).collect();
    rows.sort_by(|a, b| a[..10].cmp(&b[..10]).then_with(|| a[10].cmp(&b[10])));
    let mut out = String::from(HEADER);
    out.push('\n');
    for r in rows {
        let mut line: Vec<String> = r.iter().map(|f| escape(f)).collect();
        line.push(seed.to_string());
        line.push(hash.to_string());
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}

pub fn write_file(dir: &Path, name: &str, body: &str) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut f = std::fs::File::create(dir.join(name))?;
    f.write_all(body.as_bytes())?;
    f.flush()
}

#[cfg(test)]
mod tests {
    use super::*;
    use mdim_core::q;

    #[test]
    fn reals_have_twelve_significant_digits() {
        assert_eq!(fmt_real(std::f64::consts::PI), "3.14159265359");
        assert_eq!(fmt_real(1.0), "1");
        assert_eq!(fmt_real(-0.000123456789012345), "-0.000123456789012");
        assert_eq!(fmt_real(1.5e20), "1.5e20");
        assert_eq!(fmt_real(2.0f64.ln()), "0.69314718056");
    }

    #[test]
    fn empty_records_give_header_only() {
        assert_eq!(render_csv(&[], 0, "h"), format!("{HEADER}\n"));
    }

    #[test]
    fn rows_are_sorted_and_rationals_exact() {
        let a = Record { system: "s".into(), quantity: "b".into(), epsilon: Some(q(1, 2)), bound_type: "exact".into(), value: 2.0, ..Default::default() };
        let b = Record { quantity: "a".into(), ..a.clone() };
        let csv = render_csv(&[a, b], 7, "abc");
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 3);
        assert!(lines[1].starts_with("s,a,,,1/2,"));
        assert!(lines[1].ends_with(",exact,,2,7,abc"));
    }
}
