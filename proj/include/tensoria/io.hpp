#pragma once

// DT1 tensor files and JSON for low-rank formats.
//
// .dt1 : "DTENSOR1", u32 order, u32 dims[order], f64 data (all little-endian)
// .json: {"order", "dims", "layout": "row-major", "encoding": "base64"|"array", "data"}

#include "tensoria/formats.hpp"
#include "tensoria/tensor.hpp"

#include <json.hpp>

#include <filesystem>
#include <string>

namespace tensoria {

[[nodiscard]] std::string base64_encode(const std::string& bytes);
[[nodiscard]] std::string base64_decode(const std::string& text);

void write_tensor_dt1(const std::filesystem::path& path, const DenseTensor& t);
void write_tensor_json(const std::filesystem::path& path, const DenseTensor& t, bool base64 = true);
// by extension: .dt1 binary, anything else JSON
void write_tensor(const std::filesystem::path& path, const DenseTensor& t);
// detects the variant from the leading magic
[[nodiscard]] DenseTensor read_tensor(const std::filesystem::path& path);

[[nodiscard]] nlohmann::json tensor_to_json(const DenseTensor& t, bool base64 = true);
[[nodiscard]] DenseTensor tensor_from_json(const nlohmann::json& j);

[[nodiscard]] nlohmann::json lowrank_to_json(const LowRank& x);
[[nodiscard]] LowRank lowrank_from_json(const nlohmann::json& j);
void write_lowrank(const std::filesystem::path& path, const LowRank& x);
[[nodiscard]] LowRank read_lowrank(const std::filesystem::path& path);

// %.17g
[[nodiscard]] std::string fmt17(double x);

// Writes j with doubles at 17 significant digits.
void write_json_file(const std::filesystem::path& path, const nlohmann::json& j);

}  // namespace tensoria
