// Copyright 2026 The LIG-Doctor Authors. Apache 2.0 License.

#pragma once

#include <string>
#include <string_view>

namespace ligdoctor {

// Whole-file read; throws InputError when the file cannot be opened.
std::string read_file(const std::string& path);

// Writes to a sibling temporary file and renames it over `path`, so readers
// never observe a partial file.
void write_file_atomic(const std::string& path, std::string_view contents);

}  // namespace ligdoctor
