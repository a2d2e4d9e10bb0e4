#pragma once

#include <array>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>

namespace gaitxai {

inline constexpr std::size_t kNodes = 101;      // samples per GRF series (0..100 % stance)
inline constexpr std::size_t kSlots = 6;        // (affected, unaffected) x (ML, AP, V)
inline constexpr std::size_t kInputDim = kNodes * kSlots;

inline constexpr double kGravity = 9.81;
inline constexpr double kLrpEpsilon = 1e-5;

inline constexpr std::string_view kVersion = "0.3.0";

enum class Side { affected, unaffected };
enum class Component { ML, AP, V };

/// Slot order inside the input vector: affected ML, AP, V then unaffected ML, AP, V.
constexpr std::size_t slot_of(Side side, Component c) {
  return (side == Side::affected ? 0 : 3) + static_cast<std::size_t>(c);
}
constexpr Side side_of_slot(std::size_t slot) { return slot < 3 ? Side::affected : Side::unaffected; }
constexpr Component component_of_slot(std::size_t slot) { return static_cast<Component>(slot % 3); }

std::string_view to_string(Side s);
std::string_view to_string(Component c);
/// "affected_ML", "unaffected_V", ...
std::string slot_name(std::size_t slot);

// Error taxonomy. Everything derives from gaitxai::error so callers that only
// want a message can catch one type.
class error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};
class parse_error : public error {
 public:
  parse_error(const std::string& what, std::size_t row) : error(what), row_(row) {}
  std::size_t row() const noexcept { return row_; }

 private:
  std::size_t row_;
};
class shape_error : public error {
 public:
  using error::error;
};
class ingestion_error : public error {
 public:
  using error::error;
};
class precondition_error : public error {
 public:
  using error::error;
};
class degenerate_error : public error {
 public:
  using error::error;
};
class design_error : public error {
 public:
  using error::error;
};
// A file that could not be opened or written.
class io_error : public error {
 public:
  io_error(const std::string& what, std::string path) : error(what), path_(std::move(path)) {}
  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

}  // namespace gaitxai
