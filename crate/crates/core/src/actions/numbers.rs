//! Rule-based integer normalisation for the VALUE action.
//!
//! Accepts digit strings (optionally with thousands separators or a sign),
//! English number words up to the billions, and mixtures such as
//! `3 million` or `2.5 billion` when the product is integral.

fn word_value(w: &str) -> Option<i64> {
    let v = match w {
        "zero" => 0,
        "one" => 1,
        "two" => 2,
        "three" => 3,
        "four" => 4,
        "five" => 5,
        "six" => 6,
        "seven" => 7,
        "eight" => 8,
        "nine" => 9,
        "ten" => 10,
        "eleven" => 11,
        "twelve" => 12,
        "thirteen" => 13,
        "fourteen" => 14,
        "fifteen" => 15,
        "sixteen" => 16,
        "seventeen" => 17,
        "eighteen" => 18,
        "nineteen" => 19,
        "twenty" => 20,
        "thirty" => 30,
        "forty" => 40,
        "fifty" => 50,
        "sixty" => 60,
        "seventy" => 70,
        "eighty" => 80,
        "ninety" => 90,
        _ => return None,
    };
    Some(v)
}

fn scale_value(w: &str) -> Option<i64> {
    match w {
        "thousand" => Some(1_000),
        "million" => Some(1_000_000),
        "billion" => Some(1_000_000_000),
        _ => None,
    }
}

/// Digits with optional sign and well-formed comma grouping.
fn parse_digits(s: &str) -> Option<i64> {
    let (neg, body) = match s.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, s),
    };
    if body.is_empty() {
        return None;
    }
    if body.contains(',') {
        let groups: Vec<&str> = body.split(',').collect();
        let first_ok = !groups[0].is_empty() && groups[0].len() <= 3;
        let rest_ok = groups[1..].iter().all(|g| g.len() == 3);
        if !first_ok || !rest_ok {
            return None;
        }
    }
    let digits: String = body.chars().filter(|&c| c != ',').collect();
    if !digits.chars().all(|c| c.is_ascii_digit()) {
        return None;
    }
    let v: i64 = digits.parse().ok()?;
    Some(if neg { -v } else { v })
}

/// Decimal literal as (mantissa, power of ten divisor), e.g. `2.5` -> (25, 10).
fn parse_decimal(s: &str) -> Option<(i64, i64)> {
    let (int, frac) = s.split_once('.')?;
    if int.is_empty() || frac.is_empty() || !frac.chars().all(|c| c.is_ascii_digit()) {
        return None;
    }
    let int = parse_digits(int)?;
    let div = 10i64.checked_pow(frac.len() as u32)?;
    let frac: i64 = frac.parse().ok()?;
    Some((int.checked_mul(div)?.checked_add(frac)?, div))
}

/// Integer value of a token span, or `None` when it is not a number.
pub fn parse_number<S: AsRef<str>>(tokens: &[S]) -> Option<i64> {
    let words: Vec<String> = tokens
        .iter()
        .flat_map(|t| {
            t.as_ref()
                .split(|c: char| c.is_whitespace() || c == '-')
                .filter(|w| !w.is_empty())
                .map(|w| w.to_lowercase())
                .collect::<Vec<_>>()
        })
        .collect();
    // A leading minus sign is split off above; re-check the raw form for a
    // lone signed digit string.
    if tokens.len() == 1 {
        if let Some(v) = parse_digits(tokens[0].as_ref()) {
            return Some(v);
        }
    }
    if words.is_empty() {
        return None;
    }

    let mut total: i64 = 0;
    let mut current: i64 = 0;
    // Decimal mantissa waiting for a scale word.
    let mut pending_decimal: Option<(i64, i64)> = None;
    let mut saw_number = false;
    for (i, w) in words.iter().enumerate() {
        if w == "and" && saw_number {
            continue;
        }
        if w == "a" && i == 0 {
            current = 1;
            continue;
        }
        if let Some(v) = word_value(w).or_else(|| parse_digits(w)) {
            current = current.checked_add(v)?;
            saw_number = true;
        } else if let Some(d) = parse_decimal(w) {
            if pending_decimal.is_some() || current != 0 {
                return None;
            }
            pending_decimal = Some(d);
            saw_number = true;
        } else if w == "hundred" {
            if pending_decimal.is_some() {
                return None;
            }
            current = current.max(1).checked_mul(100)?;
            saw_number = true;
        } else {
            let scale = scale_value(w)?;
            let part = match pending_decimal.take() {
                Some((mantissa, div)) => {
                    let scaled = mantissa.checked_mul(scale)?;
                    if scaled % div != 0 {
                        return None;
                    }
                    scaled / div
                }
                None => current.max(1).checked_mul(scale)?,
            };
            total = total.checked_add(part)?;
            current = 0;
            saw_number = true;
        }
    }
    if pending_decimal.is_some() || !saw_number {
        return None;
    }
    total.checked_add(current)
}
