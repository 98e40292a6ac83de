#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace loscope {

// Fatal errors. Per-row problems are reported as values, not thrown.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class MalformedDocument : public Error {
 public:
  using Error::Error;
};

class StructuralError : public Error {
 public:
  StructuralError(std::string offending_id, const std::string& what)
      : Error(what + " (id: " + offending_id + ")"), id_(std::move(offending_id)) {}
  const std::string& offending_id() const noexcept { return id_; }

 private:
  std::string id_;
};

class UnknownModule : public Error {
 public:
  explicit UnknownModule(const std::string& id) : Error("unknown module: " + id) {}
};

class NoWeek : public Error {
 public:
  explicit NoWeek(const std::string& id) : Error("module has no week: " + id) {}
};

class UnsortedInput : public Error {
 public:
  using Error::Error;
};

class DegenerateInput : public Error {
 public:
  using Error::Error;
};

class EmptyInput : public Error {
 public:
  using Error::Error;
};

class RegistryError : public Error {
 public:
  enum class Kind { kDuplicateCode, kMalformedRow, kNoValidRows };

  RegistryError(Kind kind, std::size_t line_no, const std::string& what)
      : Error("line " + std::to_string(line_no) + ": " + what), kind_(kind), line_no_(line_no) {}
  Kind kind() const noexcept { return kind_; }
  std::size_t line_no() const noexcept { return line_no_; }

 private:
  Kind kind_;
  std::size_t line_no_;
};

class SpecError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  IoError(std::string path, const std::string& what)
      : Error(what + ": " + path), path_(std::move(path)) {}
  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

}  // namespace loscope
