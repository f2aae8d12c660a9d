//! Value Change Dump export.
//!
//! Scalar two-state VCD (values 0/1 only), timescale 1 ps, one scope per
//! module, identifier codes assigned in signal-registration order. Output is
//! byte-deterministic: no dates, no environment-dependent strings.

/// Streaming VCD writer over an in-memory buffer.
pub struct VcdWriter {
    buf: Vec<u8>,
    last_time: Option<u64>,
    count: usize,
}

/// Identifier code for the n-th registered signal: base-94 over the printable
/// ASCII range `!`..=`~`, shortest code first.
pub fn id_code(mut n: usize) -> String {
    let mut out = Vec::new();
    loop {
        out.push(b'!' + (n % 94) as u8);
        n /= 94;
        if n == 0 {
            break;
        }
        n -= 1;
    }
    out.reverse();
    String::from_utf8(out).unwrap()
}

impl VcdWriter {
    pub fn new() -> Self {
        VcdWriter {
            buf: Vec::new(),
            last_time: None,
            count: 0,
        }
    }

    /// Emit the declaration section for `signals` as (scope, name) pairs.
    ///
    /// Scopes appear in first-registration order; every signal keeps the
    /// identifier derived from its global registration index.
    pub fn write_header(&mut self, signals: &[(&str, &str)]) {
        self.count = signals.len();
        self.buf
            .extend_from_slice(b"$version\n  racetm simulator\n$end\n");
        self.buf.extend_from_slice(b"$timescale 1ps $end\n");

        let mut scope_order: Vec<&str> = Vec::new();
        for (scope, _) in signals {
            if !scope_order.contains(scope) {
                scope_order.push(scope);
            }
        }
        for scope in scope_order {
            self.buf
                .extend_from_slice(format!("$scope module {} $end\n", scope).as_bytes());
            for (idx, (s, name)) in signals.iter().enumerate() {
                if *s == scope {
                    self.buf.extend_from_slice(
                        format!("$var wire 1 {} {} $end\n", id_code(idx), name).as_bytes(),
                    );
                }
            }
            self.buf.extend_from_slice(b"$upscope $end\n");
        }
        self.buf.extend_from_slice(b"$enddefinitions $end\n");
    }

    /// Dump initial values for all registered signals.
    pub fn write_dumpvars(&mut self, values: &[bool]) {
        self.buf.extend_from_slice(b"$dumpvars\n");
        for (idx, v) in values.iter().enumerate() {
            self.write_value(idx, *v);
        }
        self.buf.extend_from_slice(b"$end\n");
    }

    /// Record a value change at `time` (ps) on the signal with registration
    /// index `idx`. Times must be non-decreasing.
    pub fn change(&mut self, time: u64, idx: usize, value: bool) {
        if self.last_time != Some(time) {
            self.buf
                .extend_from_slice(format!("#{}\n", time).as_bytes());
            self.last_time = Some(time);
        }
        self.write_value(idx, value);
    }

    fn write_value(&mut self, idx: usize, value: bool) {
        self.buf.push(if value { b'1' } else { b'0' });
        self.buf.extend_from_slice(id_code(idx).as_bytes());
        self.buf.push(b'\n');
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.buf
    }
}

impl Default for VcdWriter {
    fn default() -> Self {
        Self::new()
    }
}

/// Minimal structural check used by tests and the CLI: header sections are
/// present, every change references a declared identifier, timestamps are
/// non-decreasing and values are 0/1.
pub fn validate(bytes: &[u8]) -> Result<(), String> {
    let text = std::str::from_utf8(bytes).map_err(|e| e.to_string())?;
    let mut ids = std::collections::HashSet::new();
    let mut in_defs = true;
    let mut last_time = 0u64;
    let mut saw_enddefs = false;
    let mut saw_timescale = false;
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if in_defs {
            if line.starts_with("$timescale") {
                saw_timescale = true;
            }
            if line.starts_with("$var") {
                let parts: Vec<&str> = line.split_whitespace().collect();
                if parts.len() != 6 {
                    return Err(format!("malformed $var: {line}"));
                }
                ids.insert(parts[3].to_string());
            }
            if line == "$enddefinitions $end" {
                in_defs = false;
                saw_enddefs = true;
            }
            continue;
        }
        if line.starts_with('$') {
            continue;
        }
        if let Some(ts) = line.strip_prefix('#') {
            let t: u64 = ts.parse().map_err(|_| format!("bad timestamp {line}"))?;
            if t < last_time {
                return Err(format!("timestamp {t} goes backwards"));
            }
            last_time = t;
            continue;
        }
        let (v, id) = line.split_at(1);
        if v != "0" && v != "1" {
            return Err(format!("unsupported value in: {line}"));
        }
        if !ids.contains(id) {
            return Err(format!("undeclared identifier: {id}"));
        }
    }
    if !saw_timescale || !saw_enddefs {
        return Err("missing timescale or enddefinitions".to_string());
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn id_codes_cover_small_and_multi_char() {
        assert_eq!(id_code(0), "!");
        assert_eq!(id_code(1), "\"");
        assert_eq!(id_code(93), "~");
        assert_eq!(id_code(94), "!!");
        assert_eq!(id_code(94 + 93), "!~");
        assert_eq!(id_code(94 + 94), "\"!");
    }

    #[test]
    fn header_groups_by_scope_keeps_global_ids() {
        let mut w = VcdWriter::new();
        w.write_header(&[("a", "x"), ("b", "y"), ("a", "z")]);
        w.write_dumpvars(&[false, false, true]);
        w.change(5, 0, true);
        w.change(5, 1, true);
        w.change(9, 0, false);
        let text = String::from_utf8(w.into_bytes()).unwrap();
        // `z` is the third registered signal: id `#` inside scope `a`.
        assert!(text.contains("$scope module a $end\n$var wire 1 ! x $end\n$var wire 1 # z $end"));
        assert!(text.contains("$scope module b $end\n$var wire 1 \" y $end"));
        assert!(text.contains("#5\n1!\n1\"\n#9\n0!\n"));
        validate(text.as_bytes()).unwrap();
    }

    #[test]
    fn validate_rejects_backwards_time() {
        let bad =
            b"$timescale 1ps $end\n$var wire 1 ! x $end\n$enddefinitions $end\n#5\n1!\n#3\n0!\n";
        assert!(validate(bad).is_err());
    }
}
