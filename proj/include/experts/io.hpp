#pragma once

#include <cstdint>
#include <string>

#include "experts/error.hpp"

namespace experts {

std::string read_file(const std::string& path);

// Write-temp-then-rename so partial output never lands at `path`.
void atomic_write_file(const std::string& path, const std::string& content);

bool file_exists(const std::string& path);

// Round-trippable decimal formatting, stable across runs.
std::string fmt_double(double v);
std::string fmt_float(float v);

uint64_t fnv1a64(std::string_view data);
std::string hex64(uint64_t v);

} // namespace experts
