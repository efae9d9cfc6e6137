#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "phireg/estimator.hpp"
#include "phireg/inference.hpp"
#include "phireg/robustness.hpp"
#include "phireg/simulation.hpp"

namespace phireg {

// JSON text in and out. Numbers are written in shortest round-trip form.

std::string fit_to_json(const FitResult& fit);
/// Reads what fit_to_json wrote; V_hat must be present for testing.
FitResult fit_from_json(const std::string& text);
FitResult load_fit(const std::string& path);

std::string wald_to_json(const WaldReport& report);
std::string influence_to_json(const InfluenceReport& report, double lambda);
std::string cells_to_json(const std::vector<CellResult>& cells);

/// Row-major nested array [[...], ...] or a flat array read with the given shape.
Matrix matrix_from_json(const std::string& text, Index rows = -1, Index cols = -1);
Vector vector_from_json(const std::string& text);

/// 64-bit FNV-1a of a file's bytes, as 16 hex digits.
std::string file_digest(const std::string& path);

struct RunManifest {
    std::string subcommand;
    std::string config_json = "{}";
    std::uint64_t seed = 0;
    std::vector<std::pair<std::string, std::string>> inputs;  // path, digest
    std::vector<std::pair<std::string, double>> timings;      // label, seconds

    std::string to_json() const;
};

std::string library_version();

void write_text(const std::string& path, const std::string& text);
std::string read_text(const std::string& path);

}  // namespace phireg
