// Compile driver: runs one Solidity standard-JSON compilation in a child
// process.
//
//   node solc_driver.js <toolchain-dir>
//
// stdin:  standard-JSON input
// stdout: standard-JSON output (compiler diagnostics live inside the JSON)
//
// Per-series invocation profile: 0.4.x toolchains expose the standard-JSON
// entry point as `compileStandardWrapper`, 0.5.0 and later expose it as
// `compile`. Everything else about the exchange is identical.
'use strict';

const path = require('path');

const toolchainDir = process.argv[2];
if (!toolchainDir) {
  process.stderr.write('usage: node solc_driver.js <toolchain-dir>\n');
  process.exit(2);
}

let solc;
try {
  solc = require(path.resolve(toolchainDir));
} catch (err) {
  process.stderr.write('failed to load toolchain: ' + err.message + '\n');
  process.exit(3);
}

const entry = (typeof solc.compileStandardWrapper === 'function')
  ? solc.compileStandardWrapper
  : solc.compile;
if (typeof entry !== 'function') {
  process.stderr.write('toolchain exposes no standard-JSON entry point\n');
  process.exit(3);
}

const chunks = [];
process.stdin.on('data', (c) => chunks.push(c));
process.stdin.on('end', () => {
  const input = Buffer.concat(chunks).toString('utf8');
  let output;
  try {
    output = entry.call(solc, input);
  } catch (err) {
    process.stderr.write('compiler crashed: ' + (err && err.message) + '\n');
    process.exit(4);
  }
  process.stdout.write(output);
});
