#pragma once

#define LIONFLOW_VERSION "1.0.0"
