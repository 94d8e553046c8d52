#pragma once

#include <stdexcept>
#include <string>

namespace mcra {

// Base class for everything the library throws.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidParameter : public Error {
 public:
  using Error::Error;
};

// Argument outside the mathematical domain (e.g. log-utility at r <= 0).
class DomainError : public Error {
 public:
  using Error::Error;
};

class DuplicateId : public Error {
 public:
  using Error::Error;
};

class InfeasibleReservations : public Error {
 public:
  using Error::Error;
};

// Dual bisection did not reach the feasibility tolerance. Carries the
// final price bracket so callers can report it.
class NoConvergence : public Error {
 public:
  NoConvergence(const std::string& what, double price_low, double price_high)
      : Error(what), price_low_(price_low), price_high_(price_high) {}

  double price_low() const noexcept { return price_low_; }
  double price_high() const noexcept { return price_high_; }

 private:
  double price_low_;
  double price_high_;
};

class TooManyParticipants : public Error {
 public:
  using Error::Error;
};

class NonFiniteGradient : public Error {
 public:
  using Error::Error;
};

// Stage-annotated wrapper used by the staged allocator.
class StageError : public Error {
 public:
  StageError(const std::string& what, std::size_t stage_index, int carrier_id)
      : Error(what), stage_index_(stage_index), carrier_id_(carrier_id) {}

  std::size_t stage_index() const noexcept { return stage_index_; }
  int carrier_id() const noexcept { return carrier_id_; }

 private:
  std::size_t stage_index_;
  int carrier_id_;
};

class ParseError : public Error {
 public:
  using Error::Error;
};

class ValidationError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace mcra
