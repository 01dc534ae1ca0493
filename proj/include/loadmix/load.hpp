#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "loadmix/series.hpp"

namespace loadmix {

/// Malformed or inconsistent input data (CSV schema violations, bad rows).
struct CsvError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct LoadDataset {
    LoadSeries series;
    std::string source;        // free-text provenance (file path)
    std::string units = "kW";
};

struct Histogram {
    std::vector<double> edges;         // size B+1
    std::vector<std::int64_t> counts;  // size B
    std::vector<double> densities;     // size B; integrates to 1
};

/// Read a two-column CSV (timestamp, kw). The header line is required;
/// lines starting with '#' are skipped. Rows must parse as an ISO-8601
/// timestamp and a finite non-negative kW value on a uniform time step;
/// violations raise CsvError naming the offending line.
LoadDataset ingest_csv(const std::string& path);

/// Pointwise sum. Throws std::invalid_argument unless both series share
/// start, step, and length.
LoadSeries combine(const LoadSeries& base, const LoadSeries& ev);

/// Energy-preserving resample: mean over sub-steps when coarsening,
/// constant repetition when refining. The target step must divide or be
/// divided by the source step (and coarsening must divide the length).
LoadSeries resample(const LoadSeries& series, int step_minutes);

/// Equal-width histogram over [min, max] with normalized densities.
/// A constant sample set gets a single unit-width bin around the value.
/// Throws std::invalid_argument on empty input or bins < 1.
Histogram histogram(const std::vector<double>& samples, int bins);
Histogram histogram(const LoadSeries& series, int bins);

/// Freedman-Diaconis bin count (falls back to Sturges when the IQR
/// degenerates), clamped to [1, 512].
int freedman_diaconis_bins(const std::vector<double>& samples);

}  // namespace loadmix
