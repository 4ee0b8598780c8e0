#include "output.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <system_error>

namespace fshe::app {

std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.15g", v);
  return buf;
}

CsvText::CsvText(std::vector<std::string> header) {
  for (const auto& h : header) cell(h);
  end_row();
}

CsvText& CsvText::cell(const std::string& v) {
  if (row_open_) text_ += ',';
  text_ += v;
  row_open_ = true;
  return *this;
}

CsvText& CsvText::cell(double v) { return cell(fmt(v)); }

CsvText& CsvText::cell(long long v) { return cell(std::to_string(v)); }

void CsvText::end_row() {
  text_ += '\n';
  row_open_ = false;
}

ArtifactWriter::ArtifactWriter(std::filesystem::path dir) : dir_(std::move(dir)) {
  std::error_code ec;
  std::filesystem::create_directories(dir_, ec);
  if (ec || !std::filesystem::is_directory(dir_)) {
    throw IoError("cannot create output directory '" + dir_.string() + "': " + ec.message());
  }
}

void ArtifactWriter::write(const std::string& name, const std::string& content) {
  write_path(dir_ / name, content);
}

void ArtifactWriter::write_path(const std::filesystem::path& path, const std::string& content) {
  // Write to a temporary name first so a reader never sees a half-written artifact.
  const std::filesystem::path tmp = path.string() + ".part";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write '" + path.string() + "'");
    out << content;
    out.flush();
    if (!out) throw IoError("write failed for '" + path.string() + "'");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw IoError("cannot move '" + tmp.string() + "' into place");
  }
  written_.push_back(path.parent_path() == dir_ ? path.filename().string() : path.string());
  paths_.push_back(path);
}

std::size_t ArtifactWriter::remove_written() {
  std::size_t removed = 0;
  for (const auto& p : paths_) {
    std::error_code ec;
    if (std::filesystem::remove(p, ec)) ++removed;
  }
  paths_.clear();
  written_.clear();
  return removed;
}

}  // namespace fshe::app
