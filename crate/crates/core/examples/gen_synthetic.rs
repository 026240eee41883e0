//! Writes the seeded 30-asset daily price fixture.
//!
//! One-factor model on business days 2017-01-02..2021-12-31 with a fixed
//! holiday list, so the annualization step lands near 0.00395.
//!
//! Usage: cargo run -p drfrontier --example gen_synthetic -- fixtures/synthetic30_prices.csv

use std::fmt::Write as _;

use chrono::{Datelike, NaiveDate, Weekday};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

const ASSETS: usize = 30;
const SEED: u64 = 20170102;

fn holidays(year: i32) -> Vec<NaiveDate> {
    let d = |m, day| NaiveDate::from_ymd_opt(year, m, day).unwrap();
    // Good Friday / Easter Monday
    let easter = match year {
        2017 => d(4, 16),
        2018 => d(4, 1),
        2019 => d(4, 21),
        2020 => d(4, 12),
        _ => d(4, 4),
    };
    vec![
        d(1, 1),
        easter - chrono::Days::new(2),
        easter + chrono::Days::new(1),
        d(5, 1),
        d(10, 3),
        d(12, 24),
        d(12, 25),
        d(12, 26),
        d(12, 31),
    ]
}

fn trading_days() -> Vec<NaiveDate> {
    let mut out = Vec::new();
    let mut day = NaiveDate::from_ymd_opt(2017, 1, 2).unwrap();
    let end = NaiveDate::from_ymd_opt(2021, 12, 30).unwrap();
    let mut hol = Vec::new();
    for y in 2017..=2021 {
        hol.extend(holidays(y));
    }
    while day <= end {
        let weekend = matches!(day.weekday(), Weekday::Sat | Weekday::Sun);
        if !weekend && !hol.contains(&day) {
            out.push(day);
        }
        day = day.succ_opt().unwrap();
    }
    out
}

fn main() {
    let path = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "fixtures/synthetic30_prices.csv".into());
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let betas: Vec<f64> = (0..ASSETS).map(|_| rng.random_range(0.5..1.5)).collect();
    let idio: Vec<f64> = (0..ASSETS).map(|_| rng.random_range(0.006..0.028)).collect();
    let drift: Vec<f64> = (0..ASSETS).map(|_| rng.random_range(-0.0003..0.0008)).collect();
    let market = Normal::new(0.0002, 0.011).unwrap();
    let unit = Normal::new(0.0, 1.0).unwrap();

    let days = trading_days();
    let mut prices = vec![100.0f64; ASSETS];
    let mut text = String::from("date");
    for i in 1..=ASSETS {
        write!(text, ",S{i:02}").unwrap();
    }
    text.push('\n');
    for (t, day) in days.iter().enumerate() {
        if t > 0 {
            let f = market.sample(&mut rng);
            for i in 0..ASSETS {
                let r = drift[i] + betas[i] * f + idio[i] * unit.sample(&mut rng);
                prices[i] *= 1.0 + r;
            }
        }
        write!(text, "{day}").unwrap();
        for p in &prices {
            write!(text, ",{p:.6}").unwrap();
        }
        text.push('\n');
    }
    std::fs::write(&path, text).unwrap();
    eprintln!("wrote {} rows to {path}", days.len());
}
