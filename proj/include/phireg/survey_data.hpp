#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "phireg/model.hpp"

namespace phireg {

/// One sampled cluster: its design labels, weight and the category counts of
/// its m units. Counts read from disk are integers; expected (fractional)
/// counts are allowed when a dataset is built in code to evaluate functionals.
struct ClusterRecord {
    long stratum = 0;
    long cluster = 0;
    double weight = 1.0;
    int size = 0;
    Vector counts;      // d + 1 entries summing to size
    Vector covariates;  // k + 1 entries, covariates(0) == 1
};

/// Immutable collection of cluster records in the order they were read.
class SurveyDataset {
public:
    /// Validates every record; throws ValidationError or DimensionError.
    explicit SurveyDataset(std::vector<ClusterRecord> records);

    const std::vector<ClusterRecord>& records() const noexcept { return records_; }
    const ClusterRecord& operator[](std::size_t i) const { return records_[i]; }

    /// d + 1.
    Index num_categories() const noexcept { return categories_; }
    /// k + 1 (intercept included).
    Index num_covariates() const noexcept { return covariates_; }
    /// Total number of clusters n.
    Index num_clusters() const noexcept { return static_cast<Index>(records_.size()); }
    Index num_strata() const;
    /// Sum of w_hi m_hi.
    double tau() const noexcept { return tau_; }

    /// Position of cluster (h, i) in dataset order.
    std::optional<std::size_t> find(long stratum, long cluster) const;

    /// Copy with every weight multiplied by `factor`.
    SurveyDataset with_scaled_weights(double factor) const;

private:
    std::vector<ClusterRecord> records_;
    Index categories_ = 0;
    Index covariates_ = 0;
    double tau_ = 0.0;
};

/// Column names binding the CSV header to record fields. Count columns are
/// `<count_prefix>1..<count_prefix>{d+1}` and covariate columns
/// `<covariate_prefix>1..<covariate_prefix>{k}`.
struct CsvSchema {
    std::string stratum = "stratum";
    std::string cluster = "cluster";
    std::string weight = "weight";
    std::string size = "m";
    std::string count_prefix = "y";
    std::string covariate_prefix = "x";
};

SurveyDataset load_dataset(const std::string& path, const CsvSchema& schema = {});
SurveyDataset parse_dataset(std::istream& in, const CsvSchema& schema = {});

/// shortest round-trip form, so load(save(data)) reproduces every bit.
/// 17 significant digits, so load(save(data)) reproduces every bit.
void write_dataset(std::ostream& out, const SurveyDataset& data);
void save_dataset(const std::string& path, const SurveyDataset& data);

/// (1/tau) (w_11 y_11', ..., w_Hn_H y_Hn_H')'.
Vector empirical_probability_vector(const SurveyDataset& data);

}  // namespace phireg
