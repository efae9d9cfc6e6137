#include "phireg/survey_data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#include "phireg/detail/text.hpp"
#include "phireg/errors.hpp"

namespace phireg {

namespace {

std::string label(const ClusterRecord& r) {
    return "(h=" + std::to_string(r.stratum) + ", i=" + std::to_string(r.cluster) + ")";
}

void validate_record(const ClusterRecord& r, Index categories, Index covariates) {
    if (r.counts.size() != categories)
        throw DimensionError("cluster " + label(r) + " has " + std::to_string(r.counts.size()) +
                             " counts, expected " + std::to_string(categories));
    if (r.covariates.size() != covariates)
        throw DimensionError("cluster " + label(r) + " has " + std::to_string(r.covariates.size()) +
                             " covariates, expected " + std::to_string(covariates));
    if (!(r.weight >= 0.0) || !std::isfinite(r.weight))
        throw ValidationError("cluster " + label(r) + " has a negative or non-finite weight");
    if (r.size < 1) throw ValidationError("cluster " + label(r) + " has non-positive size");
    if (!r.counts.allFinite() || (r.counts.array() < 0.0).any())
        throw ValidationError("cluster " + label(r) + " has negative counts");
    const double total = r.counts.sum();
    if (std::abs(total - r.size) > 1e-9 * r.size)
        throw ValidationError("cluster " + label(r) + ": counts sum to " +
                              detail::format_real(total) + " but size is " + std::to_string(r.size));
    if (!r.covariates.allFinite())
        throw ValidationError("cluster " + label(r) + " has non-finite covariates");
    if (r.covariates(0) != 1.0)
        throw ValidationError("cluster " + label(r) + ": first covariate must be the intercept 1");
}

}  // namespace

SurveyDataset::SurveyDataset(std::vector<ClusterRecord> records) : records_(std::move(records)) {
    if (records_.empty()) throw ValidationError("dataset has no clusters");
    categories_ = records_.front().counts.size();
    covariates_ = records_.front().covariates.size();
    if (categories_ < 2)
        throw DimensionError("need at least two response categories, got " + std::to_string(categories_));
    if (covariates_ < 1) throw DimensionError("covariate vector must contain the intercept");
    tau_ = 0.0;
    for (const auto& r : records_) {
        validate_record(r, categories_, covariates_);
        tau_ += r.weight * r.size;
    }
    if (!(tau_ > 0.0)) throw ValidationError("total weighted size tau must be positive");
}

Index SurveyDataset::num_strata() const {
    std::set<long> strata;
    for (const auto& r : records_) strata.insert(r.stratum);
    return static_cast<Index>(strata.size());
}

std::optional<std::size_t> SurveyDataset::find(long stratum, long cluster) const {
    for (std::size_t i = 0; i < records_.size(); ++i)
        if (records_[i].stratum == stratum && records_[i].cluster == cluster) return i;
    return std::nullopt;
}

SurveyDataset SurveyDataset::with_scaled_weights(double factor) const {
    auto copy = records_;
    for (auto& r : copy) r.weight *= factor;
    return SurveyDataset(std::move(copy));
}

namespace {

// Finds columns `<prefix>1 .. <prefix>N`, contiguous from 1.
std::vector<std::size_t> numbered_columns(const std::map<std::string, std::size_t>& index,
                                          const std::string& prefix) {
    std::vector<std::size_t> cols;
    for (int j = 1;; ++j) {
        auto it = index.find(prefix + std::to_string(j));
        if (it == index.end()) break;
        cols.push_back(it->second);
    }
    return cols;
}

}  // namespace

SurveyDataset parse_dataset(std::istream& in, const CsvSchema& schema) {
    std::string line;
    std::size_t row = 1;
    // Skip blank lines before the header.
    while (std::getline(in, line) && detail::trim(line).empty()) ++row;
    if (detail::trim(line).empty()) throw ParseError(row, "missing header row");
    if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);

    std::map<std::string, std::size_t> index;
    const auto header = detail::split_commas(line);
    for (std::size_t c = 0; c < header.size(); ++c) {
        std::string name(header[c]);
        if (!index.emplace(name, c).second) throw ParseError(row, "duplicate column '" + name + "'");
    }
    auto required = [&](const std::string& name) {
        auto it = index.find(name);
        if (it == index.end()) throw ParseError(row, "header lacks column '" + name + "'");
        return it->second;
    };
    const std::size_t col_h = required(schema.stratum);
    const std::size_t col_i = required(schema.cluster);
    const std::size_t col_m = required(schema.size);
    const auto weight_it = index.find(schema.weight);
    const auto count_cols = numbered_columns(index, schema.count_prefix);
    const auto cov_cols = numbered_columns(index, schema.covariate_prefix);
    if (count_cols.size() < 2)
        throw DimensionError("need at least two count columns " + schema.count_prefix + "1, " +
                             schema.count_prefix + "2, got " + std::to_string(count_cols.size()));

    std::vector<ClusterRecord> records;
    while (std::getline(in, line)) {
        ++row;
        if (detail::trim(line).empty()) continue;
        const auto fields = detail::split_commas(line);
        if (fields.size() != header.size())
            throw ParseError(row, "expected " + std::to_string(header.size()) + " fields, got " +
                                      std::to_string(fields.size()));
        auto integer = [&](std::size_t col, const std::string& what) {
            long v = 0;
            if (!detail::parse_integer(fields[col], v))
                throw ParseError(row, "cannot parse " + what + " '" + std::string(fields[col]) + "'");
            return v;
        };
        auto real = [&](std::size_t col, const std::string& what) {
            double v = 0;
            if (!detail::parse_real(fields[col], v))
                throw ParseError(row, "cannot parse " + what + " '" + std::string(fields[col]) + "'");
            return v;
        };

        ClusterRecord rec;
        rec.stratum = integer(col_h, "stratum");
        rec.cluster = integer(col_i, "cluster");
        rec.weight = weight_it == index.end() ? 1.0 : real(weight_it->second, "weight");
        const long m = integer(col_m, "cluster size");
        if (m < 1 || m > std::numeric_limits<int>::max())
            throw ParseError(row, "cluster size must be a positive integer");
        rec.size = static_cast<int>(m);
        rec.counts.resize(static_cast<Index>(count_cols.size()));
        for (std::size_t s = 0; s < count_cols.size(); ++s)
            rec.counts(static_cast<Index>(s)) = static_cast<double>(integer(count_cols[s], "count"));
        rec.covariates.resize(static_cast<Index>(cov_cols.size() + 1));
        rec.covariates(0) = 1.0;
        for (std::size_t j = 0; j < cov_cols.size(); ++j)
            rec.covariates(static_cast<Index>(j + 1)) = real(cov_cols[j], "covariate");

        try {
            validate_record(rec, rec.counts.size(), rec.covariates.size());
        } catch (const ValidationError& e) {
            throw ValidationError("row " + std::to_string(row) + ": " + e.what());
        }
        records.push_back(std::move(rec));
    }
    if (records.empty()) throw ParseError(row, "no data rows");
    return SurveyDataset(std::move(records));
}

SurveyDataset load_dataset(const std::string& path, const CsvSchema& schema) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open dataset '" + path + "'");
    return parse_dataset(in, schema);
}

void write_dataset(std::ostream& out, const SurveyDataset& data) {
    out << "stratum,cluster,weight,m";
    for (Index s = 1; s <= data.num_categories(); ++s) out << ",y" << s;
    for (Index j = 1; j < data.num_covariates(); ++j) out << ",x" << j;
    out << '\n';
    for (const auto& r : data.records()) {
        out << r.stratum << ',' << r.cluster << ',' << detail::format_real(r.weight) << ',' << r.size;
        for (Index s = 0; s < r.counts.size(); ++s) out << ',' << detail::format_real(r.counts(s));
        for (Index j = 1; j < r.covariates.size(); ++j) out << ',' << detail::format_real(r.covariates(j));
        out << '\n';
    }
}

void save_dataset(const std::string& path, const SurveyDataset& data) {
    std::ofstream out(path);
    if (!out) throw ValidationError("cannot write dataset '" + path + "'");
    write_dataset(out, data);
}

Vector empirical_probability_vector(const SurveyDataset& data) {
    const Index c = data.num_categories();
    Vector p(c * data.num_clusters());
    Index offset = 0;
    for (const auto& r : data.records()) {
        p.segment(offset, c) = r.weight * r.counts / data.tau();
        offset += c;
    }
    return p;
}

}  // namespace phireg
