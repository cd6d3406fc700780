//! Rule-based date recognition producing `date-entity` fields.
//!
//! Recognised shapes (commas ignored): `Month D, YYYY`, `Month YYYY`,
//! `YYYY-MM-DD`, `YYYY`, `Month D` and a bare `Month`. Days may carry an
//! ordinal suffix (`1st`, `22nd`). Fields that are not present are omitted.

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct DateFields {
    pub year: Option<i64>,
    pub month: Option<i64>,
    pub day: Option<i64>,
}

pub fn month_number(word: &str) -> Option<i64> {
    let w = word.trim_end_matches('.').to_lowercase();
    const MONTHS: [&str; 12] = [
        "january",
        "february",
        "march",
        "april",
        "may",
        "june",
        "july",
        "august",
        "september",
        "october",
        "november",
        "december",
    ];
    if let Some(i) = MONTHS.iter().position(|m| *m == w) {
        return Some(i as i64 + 1);
    }
    if w == "sept" {
        return Some(9);
    }
    // Three-letter abbreviations, except "may" which is handled above.
    if w.len() == 3 {
        return MONTHS
            .iter()
            .position(|m| m.starts_with(&w))
            .map(|i| i as i64 + 1);
    }
    None
}

fn day(word: &str) -> Option<i64> {
    let w = word.to_lowercase();
    let digits = ["st", "nd", "rd", "th"]
        .iter()
        .find_map(|s| w.strip_suffix(s))
        .unwrap_or(&w);
    if digits.is_empty() || digits.len() > 2 || !digits.chars().all(|c| c.is_ascii_digit()) {
        return None;
    }
    let d: i64 = digits.parse().ok()?;
    (1..=31).contains(&d).then_some(d)
}

fn year(word: &str) -> Option<i64> {
    if word.len() != 4 || !word.chars().all(|c| c.is_ascii_digit()) {
        return None;
    }
    let y: i64 = word.parse().ok()?;
    (1000..=2999).contains(&y).then_some(y)
}

fn iso(word: &str) -> Option<DateFields> {
    let parts: Vec<&str> = word.split('-').collect();
    if parts.len() != 3 || parts[1].len() != 2 || parts[2].len() != 2 {
        return None;
    }
    let y = year(parts[0])?;
    let m: i64 = parts[1].parse().ok()?;
    let d: i64 = parts[2].parse().ok()?;
    if !(1..=12).contains(&m) || !(1..=31).contains(&d) {
        return None;
    }
    Some(DateFields {
        year: Some(y),
        month: Some(m),
        day: Some(d),
    })
}

pub fn parse_date<S: AsRef<str>>(tokens: &[S]) -> Option<DateFields> {
    let words: Vec<&str> = tokens
        .iter()
        .map(|t| t.as_ref().trim_end_matches(','))
        .filter(|t| !t.is_empty())
        .collect();
    match words.as_slice() {
        [w] => iso(w)
            .or_else(|| {
                year(w).map(|y| DateFields {
                    year: Some(y),
                    ..DateFields::default()
                })
            })
            .or_else(|| {
                month_number(w).map(|m| DateFields {
                    month: Some(m),
                    ..DateFields::default()
                })
            }),
        [m, x] => {
            let month = month_number(m)?;
            if let Some(y) = year(x) {
                Some(DateFields {
                    year: Some(y),
                    month: Some(month),
                    day: None,
                })
            } else {
                Some(DateFields {
                    year: None,
                    month: Some(month),
                    day: Some(day(x)?),
                })
            }
        }
        [m, d, y] => Some(DateFields {
            year: Some(year(y)?),
            month: Some(month_number(m)?),
            day: Some(day(d)?),
        }),
        _ => None,
    }
}
