#include "retscreen/pipeline/store.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstring>
#include <fstream>
#include <sstream>

#include "retscreen/error.hpp"

namespace retscreen::pipeline {

namespace fs = std::filesystem;

bool valid_asset_name(std::string_view name) {
  if (name.empty() || name.size() > 128 || name.front() == '.') return false;
  return std::all_of(name.begin(), name.end(), [](char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '.' || c == '_' ||
           c == '-';
  });
}

namespace {

void check_session_id(const std::string& id) {
  if (!valid_asset_name(id)) throw Error(Errc::kInvalidArgument, "invalid session id '" + id + "'");
}

void check_asset_name(const std::string& name) {
  if (!valid_asset_name(name)) throw Error(Errc::kInvalidArgument, "invalid asset name '" + name + "'");
}

[[noreturn]] void io_fail(const std::string& what, const fs::path& path) {
  throw Error(Errc::kIoError, what + " " + path.string() + ": " + std::strerror(errno));
}

void write_fd(int fd, const char* data, std::size_t size, const fs::path& path) {
  while (size > 0) {
    const auto n = ::write(fd, data, size);
    if (n < 0) {
      if (errno == EINTR) continue;
      io_fail("write", path);
    }
    data += n;
    size -= static_cast<std::size_t>(n);
  }
}

void append_durable(const fs::path& path, const std::string& text) {
  const int fd = ::open(path.c_str(), O_WRONLY | O_APPEND | O_CREAT | O_CLOEXEC, 0644);
  if (fd < 0) io_fail("open", path);
  try {
    write_fd(fd, text.data(), text.size(), path);
    if (::fsync(fd) != 0) io_fail("fsync", path);
  } catch (...) {
    ::close(fd);
    throw;
  }
  ::close(fd);
}

// Write to a sibling temp file, fsync, then rename over the target.
void write_durable(const fs::path& path, const void* data, std::size_t size) {
  const fs::path tmp = path.string() + ".tmp";
  const int fd = ::open(tmp.c_str(), O_WRONLY | O_CREAT | O_TRUNC | O_CLOEXEC, 0644);
  if (fd < 0) io_fail("open", tmp);
  try {
    write_fd(fd, static_cast<const char*>(data), size, tmp);
    if (::fsync(fd) != 0) io_fail("fsync", tmp);
  } catch (...) {
    ::close(fd);
    throw;
  }
  ::close(fd);
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw Error(Errc::kIoError, "rename " + tmp.string() + ": " + ec.message());
}

imaging::Bytes read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::kNotFound, "no such file " + path.filename().string());
  return imaging::Bytes(std::istreambuf_iterator<char>(in), {});
}

std::vector<SessionEvent> parse_lines(std::istream& in) {
  std::vector<SessionEvent> events;
  std::string line;
  std::int64_t expected = 1;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      events.push_back(parse_event(line));
    } catch (const Error& e) {
      throw e.seq() ? e : e.with_seq(expected);
    }
    ++expected;
  }
  return events;
}

}  // namespace

std::vector<SessionEvent> read_event_log(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::kIoError, "cannot read " + path.string());
  return parse_lines(in);
}

// ---- MemoryStore ----

MemoryStore::Entry& MemoryStore::entry(const std::string& session_id) {
  auto it = sessions_.find(session_id);
  if (it == sessions_.end()) throw Error(Errc::kNotFound, "unknown session '" + session_id + "'");
  return it->second;
}

void MemoryStore::create(const SessionHeader& header) {
  check_session_id(header.session_id);
  std::lock_guard lock(mu_);
  if (sessions_.count(header.session_id)) {
    throw Error(Errc::kIdCollision, "session '" + header.session_id + "' already exists");
  }
  sessions_[header.session_id] = Entry{header, {}, {}};
}

bool MemoryStore::exists(const std::string& session_id) {
  std::lock_guard lock(mu_);
  return sessions_.count(session_id) != 0;
}

void MemoryStore::append(const std::string& session_id, const SessionEvent& event) {
  std::lock_guard lock(mu_);
  entry(session_id).lines.push_back(serialize_event(event));
}

StoredSession MemoryStore::load(const std::string& session_id) {
  std::lock_guard lock(mu_);
  const auto& e = entry(session_id);
  std::stringstream text;
  for (const auto& line : e.lines) text << line << '\n';
  return StoredSession{e.header, parse_lines(text)};
}

void MemoryStore::put_asset(const std::string& session_id, const std::string& name, const imaging::Bytes& bytes) {
  check_asset_name(name);
  std::lock_guard lock(mu_);
  entry(session_id).assets[name] = bytes;
}

imaging::Bytes MemoryStore::get_asset(const std::string& session_id, const std::string& name) {
  std::lock_guard lock(mu_);
  auto& assets = entry(session_id).assets;
  auto it = assets.find(name);
  if (it == assets.end()) throw Error(Errc::kNotFound, "no asset '" + name + "'");
  return it->second;
}

std::vector<std::string> MemoryStore::list() {
  std::lock_guard lock(mu_);
  std::vector<std::string> ids;
  for (const auto& [id, e] : sessions_) ids.push_back(id);
  return ids;
}

void MemoryStore::erase(const std::string& session_id) {
  std::lock_guard lock(mu_);
  sessions_.erase(session_id);
}

// ---- DirectoryStore ----

DirectoryStore::DirectoryStore(fs::path root) : root_(std::move(root)) {
  std::error_code ec;
  fs::create_directories(root_, ec);
  if (ec) throw Error(Errc::kIoError, "cannot create store " + root_.string() + ": " + ec.message());
  load_index();
}

void DirectoryStore::load_index() {
  std::ifstream in(root_ / "index.tsv");
  std::string line;
  while (std::getline(in, line)) {
    const auto tab = line.find('\t');
    if (tab == std::string::npos) continue;
    index_[line.substr(0, tab)] = line.substr(tab + 1);
  }
}

fs::path DirectoryStore::session_dir(const std::string& session_id) {
  std::lock_guard lock(mu_);
  auto it = index_.find(session_id);
  if (it == index_.end()) throw Error(Errc::kNotFound, "unknown session '" + session_id + "'");
  return root_ / it->second;
}

void DirectoryStore::create(const SessionHeader& header) {
  check_session_id(header.session_id);
  std::lock_guard lock(mu_);
  const fs::path rel = header.session_id;
  if (index_.count(header.session_id) || fs::exists(root_ / rel)) {
    throw Error(Errc::kIdCollision, "session '" + header.session_id + "' already exists");
  }
  std::error_code ec;
  fs::create_directories(root_ / rel, ec);
  if (ec) throw Error(Errc::kIoError, "cannot create " + (root_ / rel).string() + ": " + ec.message());
  const auto text = to_json(header).dump(2) + "\n";
  write_durable(root_ / rel / "session.json", text.data(), text.size());
  append_durable(root_ / rel / "events.ndjson", "");
  append_durable(root_ / "index.tsv", header.session_id + "\t" + rel.string() + "\n");
  index_[header.session_id] = rel;
}

bool DirectoryStore::exists(const std::string& session_id) {
  std::lock_guard lock(mu_);
  return index_.count(session_id) != 0;
}

void DirectoryStore::append(const std::string& session_id, const SessionEvent& event) {
  append_durable(session_dir(session_id) / "events.ndjson", serialize_event(event) + "\n");
}

StoredSession DirectoryStore::load(const std::string& session_id) {
  const auto dir = session_dir(session_id);
  std::ifstream in(dir / "session.json");
  if (!in) throw Error(Errc::kCorruptLog, "missing session.json for '" + session_id + "'");
  const auto j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded()) throw Error(Errc::kCorruptLog, "session.json is not JSON for '" + session_id + "'");
  return StoredSession{header_from_json(j), read_event_log(dir / "events.ndjson")};
}

void DirectoryStore::put_asset(const std::string& session_id, const std::string& name, const imaging::Bytes& bytes) {
  check_asset_name(name);
  if (name == "session.json" || name == "events.ndjson") {
    throw Error(Errc::kInvalidArgument, "asset name '" + name + "' is reserved");
  }
  write_durable(session_dir(session_id) / name, bytes.data(), bytes.size());
}

imaging::Bytes DirectoryStore::get_asset(const std::string& session_id, const std::string& name) {
  if (!valid_asset_name(name) || name == "session.json" || name == "events.ndjson") {
    throw Error(Errc::kNotFound, "no asset '" + name + "'");
  }
  return read_file(session_dir(session_id) / name);
}

std::vector<std::string> DirectoryStore::list() {
  std::lock_guard lock(mu_);
  std::vector<std::string> ids;
  for (const auto& [id, p] : index_) ids.push_back(id);
  return ids;
}

void DirectoryStore::erase(const std::string& session_id) {
  std::lock_guard lock(mu_);
  auto it = index_.find(session_id);
  if (it == index_.end()) return;
  std::error_code ec;
  fs::remove_all(root_ / it->second, ec);
  index_.erase(it);
  std::string text;
  for (const auto& [id, p] : index_) text += id + "\t" + p.string() + "\n";
  write_durable(root_ / "index.tsv", text.data(), text.size());
}

}  // namespace retscreen::pipeline
