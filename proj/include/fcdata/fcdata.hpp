#pragma once

#include "fcdata/augmentor.hpp"
#include "fcdata/commands.hpp"
#include "fcdata/config.hpp"
#include "fcdata/constructor.hpp"
#include "fcdata/corpus.hpp"
#include "fcdata/diversity.hpp"
#include "fcdata/error.hpp"
#include "fcdata/gateway.hpp"
#include "fcdata/json_extract.hpp"
#include "fcdata/scoring.hpp"
#include "fcdata/semantics.hpp"
#include "fcdata/synthetic.hpp"
#include "fcdata/templates.hpp"
