"""Flask application exposing scenario validation and runs as JSON."""
from flask import Flask, jsonify, request

from acmagsim.errors import AcMagError, ConfigError
from acmagsim.experiments.config import SCENARIOS, ScenarioConfig, validate_config
from acmagsim.experiments.io import json_ready
from acmagsim.experiments.scenarios import run_scenario
from acmagsim.logging_config import LogTags, logger

app = Flask(__name__)


def _config_text() -> str:
    """TOML text from a raw body or from a JSON body's 'config' field."""
    if request.is_json:
        data = request.get_json(silent=True) or {}
        return str(data.get('config', ''))
    return request.get_data(as_text=True) or ''


def _error_response(error: AcMagError):
    status = 400 if isinstance(error, ConfigError) else 422
    return jsonify(error.to_dict()), status


@app.route('/scenarios', methods=['GET'])
def scenarios():
    """Scenario ids with descriptions, plus the fully defaulted configuration."""
    return jsonify({
        'scenarios': [{'id': name, 'description': text} for name, text in SCENARIOS.items()],
        'defaults': json_ready(ScenarioConfig().to_dict()),
    })


@app.route('/validate', methods=['POST'])
def validate():
    """Resolve a config, or list every violation."""
    try:
        config = validate_config(_config_text())
    except ConfigError as error:
        return _error_response(error)
    return jsonify({'valid': True, 'config': json_ready(config.to_dict())})


@app.route('/run', methods=['POST'])
def run():
    """Run a scenario and return its manifest and CSV texts.

    Nothing is written to disk unless the config names an out_dir.
    """
    try:
        config = validate_config(_config_text())
        result = run_scenario(config, write=config.out_dir is not None)
    except AcMagError as error:
        logger.warning(LogTags.SCENARIO, "run failed: %s", error)
        return _error_response(error)
    return jsonify({
        'manifest': json_ready(result.manifest),
        'tables': {t.name: t.to_csv() for t in result.tables},
        'files': [str(p) for p in result.paths],
    })


if __name__ == '__main__':
    app.run(debug=True, host='127.0.0.1', port=5050, use_reloader=False)
