/** Browser entry point: construct the client against the serving origin. */

import { ApiClient } from "./api.js";
import { init } from "./main.js";

init(document, new ApiClient(""));
