"""集約クエリ索引 PIR 設定値"""

from pydantic_settings import BaseSettings


class Settings(BaseSettings):
    # Field
    field_spec: str = "prime:2147483647"

    # Protocol
    privacy_threshold: int = 1          # t: 結託を許容するサーバ数
    server_count: int = 4               # ℓ: 複製サーバ数
    request_timeout_seconds: float = 30.0

    # Server
    server_host: str = "127.0.0.1"
    server_base_port: int = 8001        # サーバ i は base_port + i で待ち受け
    server_index: int = 0
    deploy_dir: str = "./deploy"
    skip_zero_columns: bool = False
    essential_only: bool = False

    # Index
    strict_row_weight: bool = False
    batch_workers: int = 1

    # Bench（机上規模の上限。--full で解除）
    bench_trials: int = 10
    bench_max_rows: int = 2 ** 20
    bench_max_index_rows: int = 2 ** 14
    bench_max_batch: int = 2 ** 6

    random_seed: int | None = None

    # Logging
    log_level: str = "INFO"

    model_config = {"env_file": ".env", "env_file_encoding": "utf-8"}


settings = Settings()
