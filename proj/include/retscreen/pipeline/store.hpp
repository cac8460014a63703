#pragma once

#include <filesystem>
#include <map>
#include <mutex>
#include <string>
#include <vector>

#include "retscreen/imaging/codec.hpp"
#include "retscreen/pipeline/session.hpp"

namespace retscreen::pipeline {

struct StoredSession {
  SessionHeader header;
  std::vector<SessionEvent> events;
};

/// Asset names are plain file names: [A-Za-z0-9._-], not starting with '.'.
bool valid_asset_name(std::string_view name);

/// Persistence for session logs and their assets (captures, overlays,
/// report.json, referral letters). Appends are durable before returning.
class SessionStore {
 public:
  virtual ~SessionStore() = default;
  /// Throws kIdCollision.
  virtual void create(const SessionHeader& header) = 0;
  virtual bool exists(const std::string& session_id) = 0;
  /// Throws kNotFound.
  virtual void append(const std::string& session_id, const SessionEvent& event) = 0;
  /// Throws kNotFound, kCorruptLog.
  virtual StoredSession load(const std::string& session_id) = 0;
  /// Throws kNotFound, kInvalidArgument for bad names.
  virtual void put_asset(const std::string& session_id, const std::string& name, const imaging::Bytes& bytes) = 0;
  virtual imaging::Bytes get_asset(const std::string& session_id, const std::string& name) = 0;
  virtual std::vector<std::string> list() = 0;
  /// Drops a session entirely (used by the benchmark to bound memory).
  virtual void erase(const std::string& session_id) = 0;
};

class MemoryStore final : public SessionStore {
 public:
  void create(const SessionHeader& header) override;
  bool exists(const std::string& session_id) override;
  void append(const std::string& session_id, const SessionEvent& event) override;
  StoredSession load(const std::string& session_id) override;
  void put_asset(const std::string& session_id, const std::string& name, const imaging::Bytes& bytes) override;
  imaging::Bytes get_asset(const std::string& session_id, const std::string& name) override;
  std::vector<std::string> list() override;
  void erase(const std::string& session_id) override;

 private:
  struct Entry {
    SessionHeader header;
    std::vector<std::string> lines;  // serialized events, as on disk
    std::map<std::string, imaging::Bytes> assets;
  };
  Entry& entry(const std::string& session_id);

  std::mutex mu_;
  std::map<std::string, Entry> sessions_;
};

/// Layout under root:
///   index.tsv                    session_id <TAB> relative directory
///   <session_id>/session.json    header
///   <session_id>/events.ndjson   one event per line
///   <session_id>/<asset>         captures, overlays, report.json, ...
class DirectoryStore final : public SessionStore {
 public:
  /// Creates root if needed. Throws kIoError.
  explicit DirectoryStore(std::filesystem::path root);

  void create(const SessionHeader& header) override;
  bool exists(const std::string& session_id) override;
  void append(const std::string& session_id, const SessionEvent& event) override;
  StoredSession load(const std::string& session_id) override;
  void put_asset(const std::string& session_id, const std::string& name, const imaging::Bytes& bytes) override;
  imaging::Bytes get_asset(const std::string& session_id, const std::string& name) override;
  std::vector<std::string> list() override;
  void erase(const std::string& session_id) override;

  const std::filesystem::path& root() const { return root_; }
  std::filesystem::path session_dir(const std::string& session_id);

 private:
  void load_index();

  std::filesystem::path root_;
  std::mutex mu_;
  std::map<std::string, std::filesystem::path> index_;
};

/// Reads an events.ndjson file. Throws kCorruptLog, kIoError.
std::vector<SessionEvent> read_event_log(const std::filesystem::path& path);

}  // namespace retscreen::pipeline
