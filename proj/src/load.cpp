#include "loadmix/load.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <string>

namespace loadmix {

namespace {

[[noreturn]] void fail_row(const std::string& path, std::size_t line_no,
                           const std::string& what) {
    throw CsvError(path + ":" + std::to_string(line_no) + ": " + what);
}

std::string_view trim(std::string_view text) {
    while (!text.empty() && (text.front() == ' ' || text.front() == '\t'))
        text.remove_prefix(1);
    while (!text.empty() &&
           (text.back() == ' ' || text.back() == '\t' || text.back() == '\r'))
        text.remove_suffix(1);
    return text;
}

double parse_kw(std::string_view field, const std::string& path, std::size_t line_no) {
    double value = 0.0;
    const char* first = field.data();
    const char* last = field.data() + field.size();
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc{} || ptr != last)
        fail_row(path, line_no, "cannot parse kW value \"" + std::string(field) + "\"");
    if (!std::isfinite(value)) fail_row(path, line_no, "kW value is not finite");
    if (value < 0.0) fail_row(path, line_no, "negative kW value");
    return value;
}

// Sample quantile with linear interpolation between order statistics.
double quantile_sorted(const std::vector<double>& sorted, double q) {
    if (sorted.size() == 1) return sorted.front();
    const double pos = q * (sorted.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(pos);
    if (lo + 1 >= sorted.size()) return sorted.back();
    const double w = pos - lo;
    return sorted[lo] * (1.0 - w) + sorted[lo + 1] * w;
}

}  // namespace

LoadDataset ingest_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw CsvError(path + ": cannot open file");

    LoadDataset dataset;
    dataset.source = path;
    std::vector<std::int64_t> stamps;
    bool header_seen = false;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::string_view text = trim(line);
        if (text.empty() || text.front() == '#') continue;
        const std::size_t comma = text.find(',');
        if (comma == std::string_view::npos)
            fail_row(path, line_no, "expected two comma-separated columns");
        std::string_view first = trim(text.substr(0, comma));
        std::string_view second = trim(text.substr(comma + 1));
        if (!header_seen) {
            if (first != "timestamp" || second != "kw")
                fail_row(path, line_no, "expected header \"timestamp,kw\"");
            header_seen = true;
            continue;
        }
        std::int64_t stamp = 0;
        try {
            stamp = parse_timestamp(first);
        } catch (const std::invalid_argument& err) {
            fail_row(path, line_no, err.what());
        }
        stamps.push_back(stamp);
        dataset.series.values_kw.push_back(parse_kw(second, path, line_no));
    }
    if (!header_seen) throw CsvError(path + ": empty file (missing header)");
    if (stamps.empty()) throw CsvError(path + ": no data rows");

    dataset.series.start_epoch_s = stamps.front();
    if (stamps.size() >= 2) {
        const std::int64_t step_s = stamps[1] - stamps[0];
        if (step_s <= 0 || step_s % 60 != 0)
            throw CsvError(path + ": timestamps must advance by whole minutes");
        for (std::size_t i = 1; i < stamps.size(); ++i) {
            if (stamps[i] - stamps[i - 1] != step_s)
                throw CsvError(path + ": non-uniform time step at row " +
                               std::to_string(i + 1) + " of the data");
        }
        dataset.series.step_minutes = static_cast<int>(step_s / 60);
    }
    return dataset;
}

LoadSeries combine(const LoadSeries& base, const LoadSeries& ev) {
    if (base.start_epoch_s != ev.start_epoch_s)
        throw std::invalid_argument("combine: series start at different times");
    if (base.step_minutes != ev.step_minutes)
        throw std::invalid_argument("combine: series have different steps");
    if (base.values_kw.size() != ev.values_kw.size())
        throw std::invalid_argument("combine: series have different lengths");
    LoadSeries sum = base;
    for (std::size_t i = 0; i < sum.values_kw.size(); ++i)
        sum.values_kw[i] += ev.values_kw[i];
    return sum;
}

LoadSeries resample(const LoadSeries& series, int step_minutes) {
    if (step_minutes <= 0)
        throw std::invalid_argument("resample: step must be positive");
    if (step_minutes == series.step_minutes) return series;

    LoadSeries out;
    out.start_epoch_s = series.start_epoch_s;
    out.step_minutes = step_minutes;
    if (step_minutes > series.step_minutes) {
        // Coarsen: mean over whole groups of sub-steps.
        if (step_minutes % series.step_minutes != 0)
            throw std::invalid_argument("resample: target step must be a multiple");
        const std::size_t group =
            static_cast<std::size_t>(step_minutes / series.step_minutes);
        if (series.values_kw.size() % group != 0)
            throw std::invalid_argument("resample: length not divisible by the group");
        out.values_kw.reserve(series.values_kw.size() / group);
        for (std::size_t i = 0; i < series.values_kw.size(); i += group) {
            double acc = 0.0;
            for (std::size_t k = 0; k < group; ++k) acc += series.values_kw[i + k];
            out.values_kw.push_back(acc / group);
        }
    } else {
        // Refine: repeat each value over its sub-steps.
        if (series.step_minutes % step_minutes != 0)
            throw std::invalid_argument("resample: target step must divide the source");
        const std::size_t group =
            static_cast<std::size_t>(series.step_minutes / step_minutes);
        out.values_kw.reserve(series.values_kw.size() * group);
        for (double v : series.values_kw)
            for (std::size_t k = 0; k < group; ++k) out.values_kw.push_back(v);
    }
    return out;
}

Histogram histogram(const std::vector<double>& samples, int bins) {
    if (samples.empty()) throw std::invalid_argument("histogram: empty input");
    if (bins < 1) throw std::invalid_argument("histogram: bins must be >= 1");
    const auto [lo_it, hi_it] = std::minmax_element(samples.begin(), samples.end());
    double lo = *lo_it;
    double hi = *hi_it;
    if (lo == hi) {
        // All samples equal: one unit-width bin around the value.
        lo -= 0.5;
        hi += 0.5;
        bins = 1;
    }
    Histogram h;
    h.edges.resize(bins + 1);
    for (int b = 0; b <= bins; ++b)
        h.edges[b] = lo + (hi - lo) * b / bins;
    h.counts.assign(bins, 0);
    const double width = (hi - lo) / bins;
    for (double y : samples) {
        int b = static_cast<int>((y - lo) / width);
        if (b >= bins) b = bins - 1;  // the maximum belongs to the last bin
        if (b < 0) b = 0;
        ++h.counts[b];
    }
    h.densities.resize(bins);
    const double n = static_cast<double>(samples.size());
    for (int b = 0; b < bins; ++b)
        h.densities[b] = h.counts[b] / (n * width);
    return h;
}

Histogram histogram(const LoadSeries& series, int bins) {
    return histogram(series.values_kw, bins);
}

int freedman_diaconis_bins(const std::vector<double>& samples) {
    if (samples.empty()) throw std::invalid_argument("histogram: empty input");
    std::vector<double> sorted = samples;
    std::sort(sorted.begin(), sorted.end());
    const double range = sorted.back() - sorted.front();
    if (range <= 0.0) return 1;
    const double iqr = quantile_sorted(sorted, 0.75) - quantile_sorted(sorted, 0.25);
    double bins;
    if (iqr > 0.0) {
        const double width = 2.0 * iqr / std::cbrt(static_cast<double>(sorted.size()));
        bins = std::ceil(range / width);
    } else {
        bins = std::ceil(std::log2(static_cast<double>(sorted.size()))) + 1;  // Sturges
    }
    return static_cast<int>(std::clamp(bins, 1.0, 512.0));
}

}  // namespace loadmix
