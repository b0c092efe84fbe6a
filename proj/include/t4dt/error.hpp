#pragma once

#include <stdexcept>
#include <string>

namespace t4dt {

/// Base class of all library errors. The category decides the CLI exit code.
class Error : public std::runtime_error {
public:
    enum class Category { Validation = 1, Range = 2, Io = 3, Resource = 4 };

    Error(Category category, const std::string& what)
        : std::runtime_error(what), category_(category) {}

    [[nodiscard]] Category category() const noexcept { return category_; }
    [[nodiscard]] int exit_code() const noexcept { return static_cast<int>(category_); }

private:
    Category category_;
};

class ValidationError : public Error {
public:
    explicit ValidationError(const std::string& what) : Error(Category::Validation, what) {}
};

/// Index, frame or coordinate outside the valid domain.
class RangeError : public Error {
public:
    explicit RangeError(const std::string& what) : Error(Category::Range, what) {}
};

class IoError : public Error {
public:
    explicit IoError(const std::string& what) : Error(Category::Io, what) {}
};

/// Memory budget exceeded or allocation failure.
class ResourceError : public Error {
public:
    explicit ResourceError(const std::string& what) : Error(Category::Resource, what) {}
};

}  // namespace t4dt
