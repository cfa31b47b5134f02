use chrono::NaiveDate;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use traffic_forecast::features::{explode_date, explode_date_with, WeekStart};

/// Civil date from days since 1970-01-01 (proleptic Gregorian).
fn civil_from_days(z: i64) -> (i64, u32, u32) {
    let z = z + 719_468;
    let era = z.div_euclid(146_097);
    let doe = z - era * 146_097;
    let yoe = (doe - doe / 1460 + doe / 36_524 - doe / 146_096) / 365;
    let doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    let mp = (5 * doy + 2) / 153;
    let d = (doy - (153 * mp + 2) / 5 + 1) as u32;
    let m = if mp < 10 { mp + 3 } else { mp - 9 } as u32;
    let y = yoe + era * 400 + if m <= 2 { 1 } else { 0 };
    (y, m, d)
}

fn is_leap(y: i64) -> bool {
    (y % 4 == 0 && y % 100 != 0) || y % 400 == 0
}

fn ordinal(y: i64, m: u32, d: u32) -> u32 {
    const BEFORE: [u32; 12] = [0, 31, 59, 90, 120, 151, 181, 212, 243, 273, 304, 334];
    BEFORE[m as usize - 1] + d + if m > 2 && is_leap(y) { 1 } else { 0 }
}

fn iso_weeks_in(y: i64) -> u32 {
    let p = |y: i64| (y + y.div_euclid(4) - y.div_euclid(100) + y.div_euclid(400)).rem_euclid(7);
    if p(y) == 4 || p(y - 1) == 3 {
        53
    } else {
        52
    }
}

#[test]
fn calendar_fields_match_independent_arithmetic() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..10_000 {
        let days = rng.random_range(-25_567..47_482); // 1900-01-01 .. 2099-12-31
        let (y, m, d) = civil_from_days(days);
        let date = NaiveDate::from_ymd_opt(y as i32, m, d).unwrap();
        let row = explode_date(date);

        // 1970-01-01 was a Thursday
        let monday_based = (days + 3).rem_euclid(7) as u32;
        let doy = ordinal(y, m, d);
        let iso = {
            let w = (doy as i64 - (monday_based as i64 + 1) + 10) / 7;
            if w < 1 {
                iso_weeks_in(y - 1)
            } else if w as u32 > iso_weeks_in(y) {
                1
            } else {
                w as u32
            }
        };
        assert_eq!((row.year as i64, row.month, row.day), (y, m, d));
        assert_eq!(row.day_of_week, monday_based, "{date}");
        assert_eq!(row.day_of_year, doy, "{date}");
        assert_eq!(row.week, iso, "{date}");
        assert_eq!(row.is_weekend, monday_based >= 5, "{date}");
        assert_eq!(row.dow_onehot.iter().map(|&b| b as u32).sum::<u32>(), 1);
        assert_eq!(row.dow_onehot[monday_based as usize], 1);

        let sunday = explode_date_with(date, WeekStart::Sunday);
        assert_eq!(sunday.day_of_week, (monday_based + 1) % 7);
        assert_eq!(sunday.is_weekend, row.is_weekend);
    }
}

#[test]
fn feature_vector_has_fourteen_columns() {
    let row = explode_date(NaiveDate::from_ymd_opt(2016, 6, 1).unwrap()).to_features();
    assert_eq!(row.len(), traffic_forecast::features::FEATURE_COLUMNS.len());
    assert_eq!(&row[..7], &[2016.0, 6.0, 22.0, 1.0, 2.0, 153.0, 0.0]);
}
