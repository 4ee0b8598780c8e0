#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "fshe/errors.hpp"

namespace fshe::app {

/// An artifact could not be written.
class IoError : public fshe::Error {
 public:
  using fshe::Error::Error;
};

/// %.15g, with "inf", "-inf" and "nan" spelled out.
std::string fmt(double v);

/// Comma-separated text built row by row.
class CsvText {
 public:
  explicit CsvText(std::vector<std::string> header);
  CsvText& cell(const std::string& v);
  CsvText& cell(double v);
  CsvText& cell(long long v);
  CsvText& cell(std::size_t v) { return cell(static_cast<long long>(v)); }
  CsvText& cell(int v) { return cell(static_cast<long long>(v)); }
  void end_row();
  const std::string& str() const { return text_; }

 private:
  std::string text_;
  bool row_open_ = false;
};

/// Writes artifacts into one output directory and remembers them, so a failed
/// run can remove what it wrote.
class ArtifactWriter {
 public:
  /// Creates the directory; throws IoError if it cannot be created.
  explicit ArtifactWriter(std::filesystem::path dir);
  void write(const std::string& name, const std::string& content);
  /// Writes to an explicit path (relative paths are taken from the working directory).
  void write_path(const std::filesystem::path& path, const std::string& content);
  const std::vector<std::string>& written() const { return written_; }
  const std::filesystem::path& dir() const { return dir_; }
  /// Removes every file written so far; returns how many were removed.
  std::size_t remove_written();

 private:
  std::filesystem::path dir_;
  std::vector<std::string> written_;
  std::vector<std::filesystem::path> paths_;
};

}  // namespace fshe::app
